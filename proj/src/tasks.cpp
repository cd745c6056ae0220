#include "goru/tasks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace goru {

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::copy: return "copy";
    case TaskKind::denoise: return "denoise";
    case TaskKind::paren: return "paren";
    case TaskKind::charlm: return "charlm";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "copy") return TaskKind::copy;
  if (text == "denoise") return TaskKind::denoise;
  if (text == "paren" || text == "parenthesis") return TaskKind::paren;
  if (text == "charlm") return TaskKind::charlm;
  throw ConfigError("unknown task '" + text + "'");
}

TaskSample gen_copy(int T, int n, int K, Prng& rng, bool random_offset) {
  require(T >= 1 && K >= 1 && n >= 2, "gen_copy: need T >= 1, K >= 1, n >= 2");
  const int len = T + 2 * K;
  const int blank = blank_token(n);
  TaskSample s;
  s.input.assign(len, blank);
  s.target.assign(len, blank);
  s.mask.assign(len, 1.0);
  const int start = random_offset ? static_cast<int>(rng.below(std::uint64_t(T))) : 0;
  for (int k = 0; k < K; ++k) {
    const int tok = static_cast<int>(rng.below(std::uint64_t(n)));
    s.input[start + k] = tok;
    s.target[K + T + k] = tok;
  }
  s.input[K + T - 1] = marker_token(n);
  return s;
}

TaskSample gen_denoise(int T, int n, int K, Prng& rng) {
  require(K >= 1 && n >= 2, "gen_denoise: need K >= 1, n >= 2");
  require(T >= K, "gen_denoise: K must not exceed T");
  const int len = T + 1 + K;
  const int noise = noise_token(n);
  TaskSample s;
  s.input.assign(len, noise);
  s.target.assign(len, noise);
  s.mask.assign(len, 1.0);
  // selection sampling: each subset of K positions is equally likely
  std::vector<int> positions;
  int needed = K;
  for (int i = 0; i < T && needed > 0; ++i) {
    if (rng.below(std::uint64_t(T - i)) < std::uint64_t(needed)) {
      positions.push_back(i);
      --needed;
    }
  }
  for (int k = 0; k < K; ++k) {
    const int tok = static_cast<int>(rng.below(std::uint64_t(n)));
    s.input[positions[k]] = tok;
    s.target[T + 1 + k] = tok;
  }
  s.input[T] = marker_token(n);
  return s;
}

TaskSample gen_paren(int T, Prng& rng, const ParenAlphabet& alphabet) {
  require(T >= 1, "gen_paren: T must be >= 1");
  require(alphabet.noise >= 1, "gen_paren: need at least one noise symbol");
  constexpr int types = ParenAlphabet::types;
  TaskSample s;
  s.heads = types;
  s.input.reserve(T);
  s.target.reserve(std::size_t(T) * types);
  s.mask.assign(T, 1.0);
  std::array<int, types> count{};
  std::vector<int> legal;
  for (int t = 0; t < T; ++t) {
    legal.clear();
    for (int k = 0; k < types; ++k)
      if (count[k] < ParenAlphabet::max_open) legal.push_back(alphabet.open(k));
    for (int k = 0; k < types; ++k)
      if (count[k] > 0) legal.push_back(alphabet.close(k));
    for (int k = 0; k < alphabet.noise; ++k) legal.push_back(alphabet.first_noise() + k);
    const int tok = legal[rng.below(legal.size())];
    if (tok < types)
      ++count[tok];
    else if (tok < 2 * types)
      --count[tok - types];
    s.input.push_back(tok);
    s.target.insert(s.target.end(), count.begin(), count.end());
  }
  return s;
}

double baseline_copy(int T, int n, int K) {
  return K * std::log(double(n)) / double(T + 2 * K);
}

double baseline_denoise(int T, int n, int K) {
  return K * std::log(double(n)) / double(T + 1 + K);
}

double baseline_paren(int T, Prng& rng, int samples, const ParenAlphabet& alphabet) {
  require(samples >= 1, "baseline_paren: need at least one sample");
  constexpr int types = ParenAlphabet::types;
  constexpr int classes = ParenAlphabet::max_open + 1;
  // counts pooled over types: all types are exchangeable
  std::vector<std::array<double, classes>> hist(T);
  for (auto& h : hist) h.fill(0.0);
  for (int i = 0; i < samples; ++i) {
    const TaskSample s = gen_paren(T, rng, alphabet);
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < types; ++k) hist[t][s.target[std::size_t(t) * types + k]] += 1.0;
  }
  const double total = double(samples) * types;
  double h_sum = 0;
  for (const auto& h : hist)
    for (double c : h)
      if (c > 0) h_sum -= (c / total) * std::log(c / total);
  return h_sum / T;
}

int TaskSpec::input_vocab() const {
  switch (kind) {
    case TaskKind::copy:
    case TaskKind::denoise: return n + 2;
    case TaskKind::paren: return paren.vocab();
    case TaskKind::charlm: break;
  }
  throw ConfigError("TaskSpec: charlm vocabulary comes from the corpus");
}

int TaskSpec::heads() const { return kind == TaskKind::paren ? ParenAlphabet::types : 1; }

int TaskSpec::classes() const {
  switch (kind) {
    case TaskKind::copy:
    case TaskKind::denoise: return n + 2;
    case TaskKind::paren: return ParenAlphabet::max_open + 1;
    case TaskKind::charlm: break;
  }
  throw ConfigError("TaskSpec: charlm vocabulary comes from the corpus");
}

int TaskSpec::steps() const {
  switch (kind) {
    case TaskKind::copy: return T + 2 * K;
    case TaskKind::denoise: return T + 1 + K;
    case TaskKind::paren: return T;
    case TaskKind::charlm: break;
  }
  throw ConfigError("TaskSpec: charlm has no fixed length");
}

TaskSample TaskSpec::sample(Prng& rng) const {
  switch (kind) {
    case TaskKind::copy: return gen_copy(T, n, K, rng, copy_random_offset);
    case TaskKind::denoise: return gen_denoise(T, n, K, rng);
    case TaskKind::paren: return gen_paren(T, rng, paren);
    case TaskKind::charlm: break;
  }
  throw ConfigError("TaskSpec: charlm samples come from a corpus stream");
}

bool TaskSpec::is_noise_input(int token) const {
  switch (kind) {
    case TaskKind::copy: return token == blank_token(n);
    case TaskKind::denoise: return token == noise_token(n);
    case TaskKind::paren: return paren.is_noise(token);
    case TaskKind::charlm: break;
  }
  return false;
}

void TaskSpec::check(const TaskSample& s) const {
  const int len = steps();
  require(s.steps() == len, "sample length " + std::to_string(s.steps()) + " does not match task length " +
                                std::to_string(len));
  require(s.heads == heads(), "sample head count does not match task");
  require(s.mask.size() == std::size_t(len), "sample mask length mismatch");
  require(s.target.size() == std::size_t(len) * std::size_t(heads()), "sample target length mismatch");
  for (int tok : s.input)
    require(tok >= 0 && tok < input_vocab(), "sample input token out of range");
  for (int y : s.target) require(y >= 0 && y < classes(), "sample target out of range");
}

double TaskSpec::baseline(Prng& rng, int paren_samples) const {
  switch (kind) {
    case TaskKind::copy: return baseline_copy(T, n, K);
    case TaskKind::denoise: return baseline_denoise(T, n, K);
    case TaskKind::paren: return baseline_paren(T, rng, paren_samples, paren);
    case TaskKind::charlm: break;
  }
  throw ConfigError("TaskSpec: no analytic baseline for charlm");
}

SequenceBatch make_batch(const std::vector<TaskSample>& samples, int vocab, int scored_from) {
  require(!samples.empty(), "make_batch: no samples");
  const int steps = samples.front().steps();
  const int heads = samples.front().heads;
  const int batch = static_cast<int>(samples.size());
  SequenceBatch out;
  out.vocab = vocab;
  out.tokens.resize(std::size_t(steps) * batch);
  Targets& tg = out.targets;
  tg.steps = steps;
  tg.batch = batch;
  tg.heads = heads;
  tg.labels.resize(std::size_t(steps) * batch * heads);
  tg.mask.resize(std::size_t(steps) * batch);
  if (scored_from > 0) tg.scored.assign(std::size_t(steps) * batch, 0);
  for (int b = 0; b < batch; ++b) {
    const TaskSample& s = samples[b];
    require(s.steps() == steps && s.heads == heads, "make_batch: samples differ in shape");
    require(s.target.size() == std::size_t(steps) * heads && s.mask.size() == std::size_t(steps),
            "make_batch: malformed sample");
    for (int t = 0; t < steps; ++t) {
      const int tok = s.input[t];
      require(tok >= 0 && tok < vocab, "make_batch: token outside vocabulary");
      out.tokens[std::size_t(t) * batch + b] = tok;
      tg.mask[std::size_t(t) * batch + b] = s.mask[t];
      for (int h = 0; h < heads; ++h)
        tg.labels[(std::size_t(t) * batch + b) * heads + h] = s.target[std::size_t(t) * heads + h];
      if (scored_from > 0 && t >= scored_from) tg.scored[std::size_t(t) * batch + b] = 1;
    }
  }
  return out;
}

SequenceBatch make_task_batch(const TaskSpec& spec, const std::vector<TaskSample>& samples) {
  const int scored_from =
      (spec.kind == TaskKind::copy || spec.kind == TaskKind::denoise) ? spec.steps() - spec.K : 0;
  return make_batch(samples, spec.input_vocab(), scored_from);
}

SequenceBatch make_task_batch(const TaskSpec& spec, int batch, Prng& rng) {
  require(batch >= 1, "make_task_batch: batch must be >= 1");
  std::vector<TaskSample> samples;
  samples.reserve(batch);
  for (int b = 0; b < batch; ++b) samples.push_back(spec.sample(rng));
  return make_task_batch(spec, samples);
}

// ------------------------------------------------------------- char LM

CharCorpus CharCorpus::from_bytes(const std::string& bytes) {
  require(!bytes.empty(), "char corpus is empty");
  std::array<int, 256> id;
  id.fill(-1);
  for (unsigned char c : bytes) id[c] = 0;
  CharCorpus out;
  for (int c = 0; c < 256; ++c)
    if (id[c] == 0) {
      id[c] = static_cast<int>(out.alphabet.size());
      out.alphabet.push_back(static_cast<unsigned char>(c));
    }
  out.tokens.reserve(bytes.size());
  for (unsigned char c : bytes) out.tokens.push_back(id[c]);
  return out;
}

CharCorpus CharCorpus::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read corpus '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!bytes.empty(), "corpus '" + path + "' is empty");
  return from_bytes(bytes);
}

CharLmStream::CharLmStream(const CharCorpus& corpus, int seq_len, int batch)
    : corpus_(corpus), seq_len_(seq_len), batch_(batch) {
  require(seq_len >= 1 && batch >= 1, "charlm: seq_len and batch must be >= 1");
  require(!corpus.tokens.empty(), "charlm: corpus is empty");
  lane_len_ = corpus.tokens.size() / std::size_t(batch);
  require(lane_len_ >= std::size_t(seq_len) + 1, "charlm: corpus too small for batch x seq_len");
  chunks_ = static_cast<int>((lane_len_ - 1) / std::size_t(seq_len));
}

std::size_t CharLmStream::chunk_offset(int lane, int k) const {
  return std::size_t(lane) * lane_len_ + std::size_t(k) * std::size_t(seq_len_);
}

CharLmStream::Chunk CharLmStream::next() {
  Chunk out;
  out.index = cursor_;
  out.continues = cursor_ > 0;
  SequenceBatch& sb = out.data;
  sb.vocab = corpus_.vocab();
  sb.tokens.resize(std::size_t(seq_len_) * batch_);
  Targets& tg = sb.targets;
  tg.steps = seq_len_;
  tg.batch = batch_;
  tg.heads = 1;
  tg.labels.resize(std::size_t(seq_len_) * batch_);
  tg.mask.assign(std::size_t(seq_len_) * batch_, 1.0);
  for (int b = 0; b < batch_; ++b) {
    const std::size_t base = chunk_offset(b, cursor_);
    for (int t = 0; t < seq_len_; ++t) {
      sb.tokens[std::size_t(t) * batch_ + b] = corpus_.tokens[base + t];
      tg.labels[std::size_t(t) * batch_ + b] = corpus_.tokens[base + t + 1];
    }
  }
  cursor_ = (cursor_ + 1) % chunks_;
  return out;
}

}  // namespace goru
