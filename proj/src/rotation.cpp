#include "goru/rotation.hpp"

namespace goru {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<RotationPair> alternating_layer(int dim, int layer) {
  std::vector<RotationPair> out;
  for (int i = layer % 2; i + 1 < dim; i += 2) out.push_back({i, i + 1});
  return out;
}

}  // namespace

std::string to_string(const Layout& layout) {
  switch (layout.kind) {
    case LayoutKind::full: return "full";
    case LayoutKind::fft: return "fft";
    case LayoutKind::custom: return "custom:" + std::to_string(layout.layers);
  }
  return "?";
}

Layout parse_layout(const std::string& text) {
  if (text == "full") return {LayoutKind::full, 0};
  if (text == "fft") return {LayoutKind::fft, 0};
  const std::string prefix = "custom:";
  if (text.rfind(prefix, 0) == 0) {
    int layers = 0;
    try {
      layers = std::stoi(text.substr(prefix.size()));
    } catch (const std::exception&) {
      throw ConfigError("layout: bad layer count in '" + text + "'");
    }
    require(layers >= 1, "layout: custom layer count must be >= 1");
    return {LayoutKind::custom, layers};
  }
  throw ConfigError("layout: expected full, fft or custom:<L>, got '" + text + "'");
}

std::vector<std::vector<RotationPair>> make_pairing(int dim, const Layout& layout) {
  require(dim >= 2, "rotation plan: dim must be >= 2");
  std::vector<std::vector<RotationPair>> layers;
  switch (layout.kind) {
    case LayoutKind::full:
      require(dim % 2 == 0, "rotation plan: full layout needs an even dim");
      for (int l = 0; l < dim; ++l) layers.push_back(alternating_layer(dim, l));
      break;
    case LayoutKind::custom:
      for (int l = 0; l < layout.layers; ++l) layers.push_back(alternating_layer(dim, l));
      break;
    case LayoutKind::fft:
      require(dim % 2 == 0, "rotation plan: fft layout needs an even dim");
      require(is_power_of_two(dim), "rotation plan: fft layout needs a power-of-two dim");
      for (int stride = 1; stride < dim; stride *= 2) {
        std::vector<RotationPair> layer;
        for (int i = 0; i < dim; ++i)
          if ((i / stride) % 2 == 0) layer.push_back({i, i + stride});
        layers.push_back(std::move(layer));
      }
      break;
  }
  return layers;
}

}  // namespace goru
