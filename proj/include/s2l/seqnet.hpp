#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "s2l/image.hpp"
#include "s2l/segment.hpp"

namespace s2l::seqnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Output labels of one recognition head. Index 0 is always the blank.
class Alphabet {
 public:
  static constexpr int kBlank = 0;
  static constexpr const char* kBlankMarker = "-";

  Alphabet() = default;
  /// `labels` are the real characters (UTF-8 code points), blank excluded.
  explicit Alphabet(std::vector<std::string> labels);

  /// A-Z then 0-9.
  static Alphabet english();
  /// One UTF-8 label per code point of `chars`; used by tests and toy heads.
  static Alphabet from_chars(const std::string& chars);
  /// UTF-8 file, one code point per line, first line is the blank marker.
  static Alphabet load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Number of classes including the blank.
  int size() const { return static_cast<int>(labels_.size()) + 1; }
  const std::string& label(int index) const;
  std::optional<int> index_of(const std::string& label) const;

  /// Encodes text (one code point per label) into label indices.
  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& labels) const;

 private:
  std::vector<std::string> labels_;
};

/// Path over the blank-augmented alphabet, one index per time step.
using Path = std::vector<int>;
/// Blank-free label indices.
using LabelSequence = std::vector<int>;

/// Columns are time steps: D x T features, C x T probabilities.
using FeatureSequence = Matrix;
using ProbSequence = Matrix;

/// Parses a path written with one character per step, '-' standing for the
/// blank, e.g. "--ddd-ee-l-hh---i-".
Path path_from_string(const std::string& text, const Alphabet& alphabet);

/// Collapse repeats, then drop blanks.
LabelSequence beta_collapse(const Path& path);

struct BestPath {
  LabelSequence labels;
  double probability = 0;  // product of the per-step maxima
  Path path;
};

BestPath ctc_best_path_decode(const ProbSequence& p);

struct CtcResult {
  double loss = 0;
  Matrix grad_logits;  // C x T, valid when p = softmax(logits) column-wise
};

/// Negative log of the total probability of all paths collapsing to
/// `target`, by the forward-backward recursion in log space.
CtcResult ctc_loss(const ProbSequence& p, const LabelSequence& target);

/// Minimum number of steps a path needs to emit `target`.
int ctc_min_steps(const LabelSequence& target);

/// Column-wise numerically stable softmax.
ProbSequence softmax_columns(const Matrix& logits);

// ---------------------------------------------------------------------------
// Network

struct NetShape {
  int input_dim = 32 * 8;  // one 32 x 8 pixel strip per time step
  int pieces = 2;
  int features = 64;
  int hidden = 64;
  int classes = 37;
};

/// All weights of one head. Every tensor is a dense matrix; biases are
/// single-column matrices. LSTM gate rows are stacked input, forget,
/// output, candidate.
struct SeqNetParams {
  NetShape shape;
  std::vector<Matrix> maxout_w;  // pieces x (features x input_dim)
  std::vector<Matrix> maxout_b;  // pieces x (features x 1)
  Matrix fwd_wx, fwd_wh, fwd_b;  // 4H x F, 4H x H, 4H x 1
  Matrix bwd_wx, bwd_wh, bwd_b;
  Matrix out_w, out_b;           // C x 2H, C x 1

  static SeqNetParams zeros(const NetShape& shape);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget-gate bias 1.
  static SeqNetParams random(const NetShape& shape, std::uint64_t seed);

  /// Visits every tensor in a fixed order; the order defines the file layout.
  void for_each(const std::function<void(Matrix&)>& fn);
  void for_each(const std::function<void(const Matrix&)>& fn) const;
  void validate() const;
  std::size_t parameter_count() const;
};

/// Visits matching tensors of two parameter sets in lockstep.
void zip_tensors(SeqNetParams& a, const SeqNetParams& b,
                 const std::function<void(Matrix&, const Matrix&)>& fn);

struct MaxoutOutput {
  FeatureSequence features;          // F x T
  Eigen::MatrixXi winner;            // F x T index of the winning piece
};

/// h = max_j (W_j x + b_j) per feature and step. Input is D x T.
MaxoutOutput maxout_forward(const Matrix& strips, const SeqNetParams& params);

/// Concatenated forward and backward hidden states, 2H x T (forward first).
Matrix bilstm_states(const FeatureSequence& x, const SeqNetParams& params);

/// Projection of the Bi-LSTM states followed by a per-step softmax.
ProbSequence bilstm_forward(const FeatureSequence& x, const SeqNetParams& params);

/// Full head: strips -> maxout -> Bi-LSTM -> softmax.
ProbSequence predict(const Matrix& strips, const SeqNetParams& params);

struct LossAndGrad {
  double loss = 0;
  SeqNetParams grad;
};

/// CTC loss of one example and its gradient with respect to every weight.
LossAndGrad loss_and_gradient(const Matrix& strips, const LabelSequence& target,
                              const SeqNetParams& params);

struct TrainConfig {
  double learning_rate = 1e-4;
  double momentum = 0.9;
  int iterations = 5000;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Classical momentum: v <- momentum * v + g; w <- w - lr * v.
class SgdMomentum {
 public:
  explicit SgdMomentum(TrainConfig cfg);
  void step(SeqNetParams& params, const SeqNetParams& grads);

 private:
  TrainConfig cfg_;
  std::optional<SeqNetParams> velocity_;
};

struct TrainingExample {
  Matrix strips;
  LabelSequence target;
};

struct TrainReport {
  int iterations = 0;
  double mean_loss = 0;  // per example, at the last iteration
  std::vector<double> history;
};

/// Full-batch training: one iteration sums the gradients of every example
/// and takes one optimizer step. Stops early once `stop` returns true.
TrainReport train(SeqNetParams& params, const std::vector<TrainingExample>& data,
                  const TrainConfig& cfg,
                  const std::function<bool(int iteration, double mean_loss)>& stop = {});

// Parameter file: little-endian uint32 words
//   magic "S2LP", version (1), tensor count, then (rows, cols) per tensor,
// followed by every tensor's float32 values in row-major order. Tensor order
// is SeqNetParams::for_each; the maxout piece count is implied by the count.
void save_params(const std::filesystem::path& path, const SeqNetParams& params);
SeqNetParams load_params(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Heads and recognition

inline constexpr int kStripHeight = 32;
inline constexpr int kStripWidth = 8;

struct Head {
  std::string id;  // "en", "hi", "te"
  Alphabet alphabet;
  SeqNetParams params;
};

/// Cuts a binary (0/255) 32-pixel-high image into 8-pixel-wide strips.
/// The last strip is zero-padded. Each column of the result is one strip,
/// flattened row-major and scaled to [0, 1].
Matrix strips_from_image(const GrayImage& binary);

/// Crop, rescale to 32 px height, and Otsu-binarize (foreground = bright).
GrayImage prepare_word_image(const RgbImage& img, const segment::BBox& box);

struct HeadScore {
  std::string id;
  double score = 0;
};

/// Highest-scoring head at or above the threshold; ties go to the head
/// listed first. Throws on an empty head list.
std::optional<std::string> gate_language(const std::vector<HeadScore>& scores, double threshold);

/// Confidence of a head on one input: mean over steps of the largest class
/// probability.
double head_confidence(const ProbSequence& p);

/// Reading order: rows by vertical center (a box joins a row when it
/// overlaps the row's first box by at least half of the smaller height),
/// left to right within a row.
std::vector<std::vector<segment::BBox>> reading_order(std::vector<segment::BBox> boxes);

struct BoxReading {
  segment::BBox box;
  std::optional<std::string> head;
  std::string text;
  std::vector<HeadScore> scores;
};

struct Recognition {
  std::string text;                  // words joined by spaces, rows by '\n'
  std::optional<std::string> language;  // most frequent winning head
  std::vector<BoxReading> boxes;
};

Recognition recognize(const RgbImage& masked, const std::vector<segment::BBox>& boxes,
                      const std::vector<Head>& heads, double threshold);

}  // namespace s2l::seqnet
