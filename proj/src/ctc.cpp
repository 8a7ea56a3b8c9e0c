#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "s2l/error.hpp"
#include "s2l/seqnet.hpp"
#include "s2l/utf8.hpp"

namespace s2l::seqnet {

Alphabet::Alphabet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::unordered_map<std::string, int> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw Error("empty alphabet label");
    if (l == kBlankMarker) throw Error("the blank marker cannot be a real label");
    if (!seen.emplace(l, 0).second) throw Error("duplicate alphabet label: " + l);
  }
}

Alphabet Alphabet::english() {
  std::vector<std::string> labels;
  for (char c = 'A'; c <= 'Z'; ++c) labels.emplace_back(1, c);
  for (char c = '0'; c <= '9'; ++c) labels.emplace_back(1, c);
  return Alphabet(std::move(labels));
}

Alphabet Alphabet::from_chars(const std::string& chars) { return Alphabet(utf8::split(chars)); }

Alphabet Alphabet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open alphabet " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("empty alphabet file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kBlankMarker) throw Error("alphabet must start with the blank marker line");
  std::vector<std::string> labels;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (utf8::decode(line).size() != 1) throw Error("alphabet line is not one code point: " + line);
    labels.push_back(line);
  }
  return Alphabet(std::move(labels));
}

void Alphabet::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write alphabet " + path.string());
  out << kBlankMarker << '\n';
  for (const auto& l : labels_) out << l << '\n';
}

const std::string& Alphabet::label(int index) const {
  static const std::string blank = kBlankMarker;
  if (index == kBlank) return blank;
  if (index < 0 || index > static_cast<int>(labels_.size())) throw Error("label index out of range");
  return labels_[static_cast<std::size_t>(index - 1)];
}

std::optional<int> Alphabet::index_of(const std::string& label) const {
  if (label == kBlankMarker) return kBlank;
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<int>(it - labels_.begin()) + 1;
}

std::vector<int> Alphabet::encode(const std::string& text) const {
  std::vector<int> out;
  for (const auto& cp : utf8::split(text)) {
    const auto idx = index_of(cp);
    if (!idx || *idx == kBlank) throw Error("character not in alphabet: " + cp);
    out.push_back(*idx);
  }
  return out;
}

std::string Alphabet::decode(const std::vector<int>& labels) const {
  std::string out;
  for (int l : labels) out += label(l);
  return out;
}

Path path_from_string(const std::string& text, const Alphabet& alphabet) {
  Path path;
  for (const auto& cp : utf8::split(text)) {
    const auto idx = alphabet.index_of(cp);
    if (!idx) throw Error("character not in alphabet: " + cp);
    path.push_back(*idx);
  }
  return path;
}

LabelSequence beta_collapse(const Path& path) {
  LabelSequence out;
  int prev = -1;
  for (int l : path) {
    if (l != prev && l != Alphabet::kBlank) out.push_back(l);
    prev = l;
  }
  return out;
}

BestPath ctc_best_path_decode(const ProbSequence& p) {
  BestPath best;
  best.probability = 1.0;
  for (Eigen::Index t = 0; t < p.cols(); ++t) {
    Eigen::Index arg = 0;
    const double m = p.col(t).maxCoeff(&arg);
    best.path.push_back(static_cast<int>(arg));
    best.probability *= m;
  }
  best.labels = beta_collapse(best.path);
  return best;
}

int ctc_min_steps(const LabelSequence& target) {
  int steps = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++steps;
  return steps;
}

ProbSequence softmax_columns(const Matrix& logits) {
  ProbSequence p(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    const double m = logits.col(t).maxCoeff();
    p.col(t) = (logits.col(t).array() - m).exp().matrix();
    p.col(t) /= p.col(t).sum();
  }
  return p;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

CtcResult ctc_loss(const ProbSequence& p, const LabelSequence& target) {
  const Eigen::Index classes = p.rows();
  const Eigen::Index steps = p.cols();
  if (steps == 0) throw Error("empty probability sequence");
  for (int l : target)
    if (l <= Alphabet::kBlank || l >= classes) throw Error("target label out of range");
  if (steps < ctc_min_steps(target)) throw Error("target longer than path capacity");

  // Blank-augmented target: blank, l1, blank, l2, ..., blank.
  std::vector<int> ext(2 * target.size() + 1, Alphabet::kBlank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  const auto S = static_cast<Eigen::Index>(ext.size());
  auto skip_allowed = [&](Eigen::Index s) {
    return s >= 2 && ext[static_cast<std::size_t>(s)] != Alphabet::kBlank &&
           ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
  };

  const Matrix logp = p.array().log().matrix();
  auto lp = [&](Eigen::Index s, Eigen::Index t) { return logp(ext[static_cast<std::size_t>(s)], t); };

  Matrix alpha = Matrix::Constant(S, steps, kNegInf);
  alpha(0, 0) = lp(0, 0);
  if (S > 1) alpha(1, 0) = lp(1, 0);
  for (Eigen::Index t = 1; t < steps; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double a = alpha(s, t - 1);
      if (s >= 1) a = log_add(a, alpha(s - 1, t - 1));
      if (skip_allowed(s)) a = log_add(a, alpha(s - 2, t - 1));
      alpha(s, t) = a == kNegInf ? kNegInf : a + lp(s, t);
    }
  }

  // beta(s, t): log probability of completing the target from state s at t,
  // excluding the emission at t itself.
  Matrix beta = Matrix::Constant(S, steps, kNegInf);
  beta(S - 1, steps - 1) = 0;
  if (S > 1) beta(S - 2, steps - 1) = 0;
  for (Eigen::Index t = steps - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double b = beta(s, t + 1) + lp(s, t + 1);
      if (s + 1 < S) b = log_add(b, beta(s + 1, t + 1) + lp(s + 1, t + 1));
      if (s + 2 < S && skip_allowed(s + 2)) b = log_add(b, beta(s + 2, t + 1) + lp(s + 2, t + 1));
      beta(s, t) = b;
    }
  }

  double log_z = alpha(S - 1, steps - 1);
  if (S > 1) log_z = log_add(log_z, alpha(S - 2, steps - 1));

  CtcResult result;
  result.loss = -log_z;
  result.grad_logits = p;
  if (log_z == kNegInf) return result;
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      const double occ = alpha(s, t) + beta(s, t);
      if (occ == kNegInf) continue;
      result.grad_logits(ext[static_cast<std::size_t>(s)], t) -= std::exp(occ - log_z);
    }
  }
  return result;
}

}  // namespace s2l::seqnet
