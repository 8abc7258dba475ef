#include "plr/similarity.hpp"

#include <cmath>

#include "plr/error.hpp"

namespace plr::sim {

namespace {

constexpr double kJsEpsilon = 1e-12;

// Neumaier compensated sum; the pair loop adds up to ~10^6 terms.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace

PatchVector to_vector(const img::GrayImage& patch) {
  require(!patch.empty(), ErrorCode::kInvalidArgument, "cannot vectorize an empty patch");
  const auto resized = img::resize_bilinear(patch, kPatchSide, kPatchSide);
  PatchVector v{};
  const auto px = resized.pixels();
  for (std::size_t i = 0; i < kPatchDim; ++i) v[i] = px[i];
  return v;
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::kShapeMismatch, "vector lengths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  require(na > 0.0 && nb > 0.0, ErrorCode::kZeroVector, "cosine distance of a zero vector");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double js_divergence(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && !a.empty(), ErrorCode::kShapeMismatch, "vector lengths differ");
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i] >= 0.0 && b[i] >= 0.0, ErrorCode::kInvalidArgument, "JS divergence needs non-negative vectors");
    sa += a[i] + kJsEpsilon;
    sb += b[i] + kJsEpsilon;
  }
  // Each term pairs p and q so that js(a, b) and js(b, a) sum identical values.
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double p = (a[i] + kJsEpsilon) / sa;
    const double q = (b[i] + kJsEpsilon) / sb;
    const double m = 0.5 * (p + q);
    total += 0.5 * (p * std::log(p / m) + q * std::log(q / m));
  }
  return total;
}

SimilarityReport set_similarity(std::span<const PatchVector> a, std::span<const PatchVector> b) {
  require(!a.empty() && !b.empty(), ErrorCode::kEmptyInput, "similarity needs two non-empty sets");
  CompensatedSum cos_sum, js_sum;
  for (const auto& va : a) {
    for (const auto& vb : b) {
      cos_sum.add(cosine_distance(va, vb));
      js_sum.add(js_divergence(va, vb));
    }
  }
  SimilarityReport r;
  r.size_a = a.size();
  r.size_b = b.size();
  r.pair_count = a.size() * b.size();
  r.mean_cosine_distance = cos_sum.value() / static_cast<double>(r.pair_count);
  r.mean_js_divergence = js_sum.value() / static_cast<double>(r.pair_count);
  return r;
}

SimilarityReport set_similarity(std::span<const img::GrayImage> a, std::span<const img::GrayImage> b) {
  std::vector<PatchVector> va, vb;
  va.reserve(a.size());
  vb.reserve(b.size());
  for (const auto& p : a) va.push_back(to_vector(p));
  for (const auto& p : b) vb.push_back(to_vector(p));
  return set_similarity(va, vb);
}

}  // namespace plr::sim
