#ifndef GORU_TASKS_HPP
#define GORU_TASKS_HPP

#include "goru/numcore.hpp"
#include "goru/train.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace goru {

enum class TaskKind { copy, denoise, paren, charlm };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

/// One sequence. For copy/denoise/charlm `target` has one class per step;
/// for paren it is a steps x 10 row-major matrix of unmatched counts.
struct TaskSample {
  std::vector<int> input;
  std::vector<int> target;
  std::vector<double> mask;
  int heads = 1;

  int steps() const { return static_cast<int>(input.size()); }
};

// Copy / denoise alphabet: data tokens 0..n-1, then two specials.
inline int blank_token(int n) { return n; }
inline int noise_token(int n) { return n; }
inline int marker_token(int n) { return n + 1; }

/// Paren alphabet: opening symbols 0..9, closing 10..19 (type k closes with
/// 10 + k), noise symbols from 20 on.
struct ParenAlphabet {
  static constexpr int types = 10;
  static constexpr int max_open = 10;
  int noise = 10;

  int open(int type) const { return type; }
  int close(int type) const { return types + type; }
  int first_noise() const { return 2 * types; }
  int vocab() const { return 2 * types + noise; }
  bool is_noise(int token) const { return token >= first_noise(); }
};

/// Data block of K tokens, T-1 blanks, marker, K blanks. Target is blank
/// except the last K steps, which repeat the data block. With
/// `random_offset` the data block starts at a uniform position in
/// [0, T - 1] of the pre-marker span instead of at 0.
TaskSample gen_copy(int T, int n, int K, Prng& rng, bool random_offset = false);

/// K data tokens at sorted distinct positions in [0, T), noise elsewhere,
/// marker at T, then K noise inputs; the last K targets list the data.
TaskSample gen_denoise(int T, int n, int K, Prng& rng);

/// Each step draws uniformly from the legal symbols (all noise, openings
/// below the cap, closings with something unmatched). Target row t holds
/// the per-type unmatched counts after consuming input[t].
TaskSample gen_paren(int T, Prng& rng, const ParenAlphabet& alphabet = {});

/// Memoryless-optimal per-step cross-entropy: K ln n / (T + 2K).
double baseline_copy(int T, int n, int K);
/// K ln n / (T + 1 + K).
double baseline_denoise(int T, int n, int K);
/// Entropy of the per-position count distribution (the best input-blind
/// predictor), estimated from `samples` generated sequences.
double baseline_paren(int T, Prng& rng, int samples = 10000, const ParenAlphabet& alphabet = {});

/// Static description of a synthetic task (the readout shape follows).
struct TaskSpec {
  TaskKind kind = TaskKind::copy;
  int T = 50;
  int n = 8;
  int K = 10;
  bool copy_random_offset = false;
  ParenAlphabet paren;

  int input_vocab() const;
  int heads() const;
  int classes() const;
  int steps() const;
  TaskSample sample(Prng& rng) const;
  /// Blank (copy), noise (denoise), or a paren noise symbol.
  bool is_noise_input(int token) const;
  /// Throws ConfigError unless `s` has this task's length and alphabet.
  void check(const TaskSample& s) const;
  double baseline(Prng& rng, int paren_samples = 10000) const;
};

/// Batch of token sequences with per-step targets.
struct SequenceBatch {
  int vocab = 0;
  std::vector<int> tokens;  // [step][sample]
  Targets targets;

  int steps() const { return targets.steps; }
  int batch() const { return targets.batch; }
  int token(int t, int b) const { return tokens[std::size_t(t) * targets.batch + b]; }
};

/// Packs equal-length samples; `scored_from` marks the first step that
/// counts toward accuracy (0 = all steps).
SequenceBatch make_batch(const std::vector<TaskSample>& samples, int vocab, int scored_from = 0);

/// `batch` fresh samples of `spec`, accuracy scored on recall steps for
/// copy/denoise and everywhere for paren.
SequenceBatch make_task_batch(const TaskSpec& spec, int batch, Prng& rng);
SequenceBatch make_task_batch(const TaskSpec& spec, const std::vector<TaskSample>& samples);

template <typename S>
std::vector<Mat<S>> one_hot_inputs(const SequenceBatch& batch) {
  std::vector<Mat<S>> out(batch.steps());
  for (int t = 0; t < batch.steps(); ++t) {
    out[t] = Mat<S>::Zero(batch.batch(), batch.vocab);
    for (int b = 0; b < batch.batch(); ++b) out[t](b, batch.token(t, b)) = S(1);
  }
  return out;
}

// ------------------------------------------------------------- char LM

/// Byte-level corpus: vocabulary is the sorted set of distinct bytes.
struct CharCorpus {
  std::vector<int> tokens;
  std::vector<unsigned char> alphabet;  // token id -> byte

  int vocab() const { return static_cast<int>(alphabet.size()); }
  static CharCorpus from_bytes(const std::string& bytes);
  static CharCorpus load(const std::string& path);
};

/// Splits the corpus into `batch` contiguous lanes of equal length and walks
/// them in `seq_len` chunks; chunk k+1 of a lane starts exactly where chunk
/// k ended, so the final hidden state of one chunk is a valid initial state
/// for the next. After the last full chunk the stream wraps to the start
/// and reports `continues == false`.
class CharLmStream {
 public:
  CharLmStream(const CharCorpus& corpus, int seq_len, int batch);

  struct Chunk {
    SequenceBatch data;
    bool continues = false;  // state from the previous chunk carries over
    int index = 0;           // chunk index within each lane
  };

  Chunk next();
  int chunks_per_lane() const { return chunks_; }
  std::size_t lane_length() const { return lane_len_; }
  /// Corpus offset of the first input token of chunk k in lane `lane`.
  std::size_t chunk_offset(int lane, int k) const;

 private:
  const CharCorpus& corpus_;
  int seq_len_;
  int batch_;
  std::size_t lane_len_;
  int chunks_;
  int cursor_ = 0;
};

}  // namespace goru

#endif  // GORU_TASKS_HPP
