#include "goru/cells.hpp"

namespace goru {

std::string to_string(CellKind kind) {
  switch (kind) {
    case CellKind::vanilla: return "vanilla";
    case CellKind::gru: return "gru";
    case CellKind::lstm: return "lstm";
    case CellKind::ortho_rnn: return "ortho_rnn";
    case CellKind::goru: return "goru";
  }
  return "?";
}

CellKind parse_cell_kind(const std::string& text) {
  if (text == "vanilla" || text == "rnn") return CellKind::vanilla;
  if (text == "gru") return CellKind::gru;
  if (text == "lstm") return CellKind::lstm;
  if (text == "ortho_rnn" || text == "eurnn" || text == "ortho") return CellKind::ortho_rnn;
  if (text == "goru") return CellKind::goru;
  throw ConfigError("unknown model kind '" + text + "'");
}

void validate(const CellConfig& config) {
  require(config.d_x >= 1, "cell config: d_x must be >= 1");
  require(config.d_h >= 1, "cell config: d_h must be >= 1");
  require(config.kind == CellKind::goru || (!config.disable_reset && !config.disable_update),
          "cell config: gate ablations are only valid for goru");
  if (config.has_rotation()) {
    require(config.d_h >= 2, "cell config: rotation cells need d_h >= 2");
    if (config.layout.kind != LayoutKind::custom)
      require(config.d_h % 2 == 0, "cell config: full/fft layouts need an even d_h");
    if (config.layout.kind == LayoutKind::fft)
      require((config.d_h & (config.d_h - 1)) == 0, "cell config: fft layout needs a power-of-two d_h");
  }
}

ParamCount param_count(const CellConfig& config) {
  validate(config);
  const std::int64_t h = config.d_h, x = config.d_x;
  ParamCount out;
  std::int64_t angles = 0;
  if (config.has_rotation()) {
    for (const auto& layer : make_pairing(config.d_h, config.layout))
      angles += static_cast<std::int64_t>(layer.size());
  }
  switch (config.kind) {
    case CellKind::vanilla:
      out.hidden_to_hidden = h * h;
      out.total = h * h + h * x + h;
      break;
    case CellKind::gru:
      out.hidden_to_hidden = 3 * h * h;
      out.total = 2 * h * (h + x) + h * x + h * h + 3 * h;
      break;
    case CellKind::lstm:
      out.hidden_to_hidden = 4 * h * h;
      out.total = 4 * h * (h + x) + 4 * h;
      break;
    case CellKind::ortho_rnn:
      out.hidden_to_hidden = angles;
      out.total = angles + h * x + h;
      break;
    case CellKind::goru: {
      const std::int64_t gates = (config.disable_update ? 0 : 1) + (config.disable_reset ? 0 : 1);
      out.hidden_to_hidden = angles + gates * h * h;
      out.total = angles + h * x + h + gates * (h * h + h * x + h);
      break;
    }
  }
  return out;
}

}  // namespace goru
