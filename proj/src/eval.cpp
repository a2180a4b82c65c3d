#include "glift/eval.hpp"

#include "binary_io.hpp"
#include "glift/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace glift {

using nlohmann::json;

size_t BinaryMask::area() const {
  size_t a = 0;
  for (uint8_t b : bits) a += b;
  return a;
}

QuerySet load_queries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  QuerySet qs;
  try {
    qs.dim = j.at("dim").get<uint32_t>();
    auto parse = [&](const json& arr, std::vector<QuerySet::Entry>& out) {
      for (const json& e : arr) {
        QuerySet::Entry entry;
        entry.name = e.at("name").get<std::string>();
        const auto vec = e.at("vec").get<std::vector<float>>();
        if (vec.size() != qs.dim)
          throw FormatError("query '" + entry.name + "' has wrong dimension");
        entry.vec = Eigen::Map<const Eigen::VectorXf>(vec.data(), qs.dim);
        const float n = entry.vec.norm();
        if (!(n > 0))
          throw ValidationError("query '" + entry.name + "' is a zero vector");
        entry.vec /= n;
        out.push_back(std::move(entry));
      }
    };
    parse(j.at("queries"), qs.queries);
    if (j.contains("negatives")) parse(j.at("negatives"), qs.negatives);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return qs;
}

std::vector<float> relevancy(const GaussianFeatureField& field,
                             Eigen::Ref<const Eigen::VectorXf> query,
                             std::span<const QuerySet::Entry> negatives) {
  if (static_cast<uint32_t>(query.size()) != field.dim)
    throw ValidationError("relevancy: query dimension mismatch");
  for (const auto& n : negatives)
    if (static_cast<uint32_t>(n.vec.size()) != field.dim)
      throw ValidationError("relevancy: negative dimension mismatch");

  std::vector<float> scores(field.count(), 0.0f);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(field.count()); ++i) {
    if (field.weights[i] == 0.0f) continue;
    const auto z = field.feature_vec(i);
    const double zq = z.cast<double>().dot(query.cast<double>());
    double s;
    if (negatives.empty()) {
      s = 0.5 * (zq + 1.0);
    } else {
      s = std::numeric_limits<double>::infinity();
      const double eq = std::exp(zq);
      for (const auto& neg : negatives) {
        const double en = std::exp(z.cast<double>().dot(neg.vec.cast<double>()));
        s = std::min(s, eq / (eq + en));
      }
    }
    scores[i] = static_cast<float>(s);
  }
  return scores;
}

std::vector<uint32_t> select_3d(const GaussianFeatureField& field,
                                Eigen::Ref<const Eigen::VectorXf> query,
                                std::span<const QuerySet::Entry> negatives,
                                double threshold) {
  const std::vector<float> scores = relevancy(field, query, negatives);
  std::vector<uint32_t> selected;
  for (uint32_t i = 0; i < scores.size(); ++i)
    if (field.weights[i] > 0.0f && scores[i] >= threshold)
      selected.push_back(i);
  return selected;
}

BinaryMask render_selection(const GaussianScene& scene, const Camera& cam,
                            std::span<const uint32_t> selected,
                            double threshold) {
  GaussianScene sub;
  sub.gaussians.reserve(selected.size());
  for (uint32_t i : selected) sub.gaussians.push_back(scene.gaussians[i]);
  const WeightMap wm = per_pixel_weights(sub, cam);

  BinaryMask mask;
  mask.height = cam.height;
  mask.width = cam.width;
  mask.bits.assign(static_cast<size_t>(cam.height) * cam.width, 0);
  for (size_t px = 0; px < mask.bits.size(); ++px) {
    double acc = 0;
    for (const WeightMap::Entry& e : wm.pixels[px]) acc += e.weight;
    mask.bits[px] = acc >= threshold ? 1 : 0;
  }
  return mask;
}

FeatureMap render_feature_image(const GaussianScene& scene, const Camera& cam,
                                const GaussianFeatureField& field) {
  if (scene.size() != field.count())
    throw ValidationError("render_feature_image: scene/field size mismatch");
  const WeightMap wm = per_pixel_weights(scene, cam);

  FeatureMap img;
  img.height = cam.height;
  img.width = cam.width;
  img.dim = field.dim;
  img.data.assign(
      static_cast<size_t>(cam.height) * cam.width * field.dim, 0.0f);

#pragma omp parallel
  {
    Eigen::VectorXd acc(field.dim);
#pragma omp for schedule(static)
    for (int64_t px = 0; px < static_cast<int64_t>(wm.pixels.size()); ++px) {
      acc.setZero();
      double wsum = 0;
      for (const WeightMap::Entry& e : wm.pixels[px]) {
        if (field.weights[e.index] == 0.0f) continue;
        acc += static_cast<double>(e.weight) *
               field.feature_vec(e.index).cast<double>();
        wsum += e.weight;
      }
      if (wsum < 1e-6) continue;
      const double n = acc.norm();
      if (n < 1e-12) continue;
      float* out = img.data.data() + px * field.dim;
      for (uint32_t c = 0; c < field.dim; ++c)
        out[c] = static_cast<float>(acc[c] / n);
    }
  }
  return img;
}

SegMetrics miou_macc(std::span<const uint32_t> pred,
                     std::span<const uint32_t> gt, uint32_t class_count) {
  if (pred.size() != gt.size())
    throw ValidationError("miou_macc: shape mismatch");
  std::vector<uint64_t> tp(class_count, 0), fp(class_count, 0),
      fn(class_count, 0);
  for (size_t i = 0; i < pred.size(); ++i) {
    const uint32_t p = pred[i], g = gt[i];
    const bool pv = p < class_count, gv = g < class_count;
    if (pv && gv && p == g) {
      ++tp[p];
    } else {
      if (pv) ++fp[p];
      if (gv) ++fn[g];
    }
  }
  SegMetrics m;
  size_t present = 0;
  for (uint32_t c = 0; c < class_count; ++c) {
    if (tp[c] + fn[c] == 0) continue;  // class absent from ground truth
    ++present;
    const double iou =
        static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c] + fn[c]);
    const double acc =
        static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]);
    m.per_class_iou[c] = iou;
    m.per_class_acc[c] = acc;
    m.miou += iou;
    m.macc += acc;
  }
  if (present > 0) {
    m.miou /= static_cast<double>(present);
    m.macc /= static_cast<double>(present);
  }
  return m;
}

std::pair<double, double> mask_iou_acc(const BinaryMask& pred,
                                       const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw ValidationError("mask_iou_acc: shape mismatch");
  uint64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < pred.bits.size(); ++i) {
    if (pred.bits[i] && gt.bits[i]) ++tp;
    else if (pred.bits[i]) ++fp;
    else if (gt.bits[i]) ++fn;
  }
  if (tp + fn == 0) return {0.0, 0.0};
  return {static_cast<double>(tp) / static_cast<double>(tp + fp + fn),
          static_cast<double>(tp) / static_cast<double>(tp + fn)};
}

// ---------------------------------------------------------------------------
// Morphology via the exact squared Euclidean distance transform
// (Felzenszwalb-Huttenlocher). Distances are integers, so the disk test
// d^2 <= r^2 is exact.

namespace {

constexpr double kInf = 1e18;

// 1D squared distance transform of a sampled function.
void dt1d(const std::vector<double>& f, std::vector<double>& d, int n,
          std::vector<int>& v, std::vector<double>& zbuf) {
  int k = 0;
  v[0] = 0;
  zbuf[0] = -kInf;
  zbuf[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[k];
      s = (f[q] + q * q - (f[p] + p * p)) / (2.0 * q - 2.0 * p);
      if (s > zbuf[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    zbuf[k] = s;
    zbuf[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (zbuf[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

// Squared distance to the nearest set pixel of `feature` (h x w, row-major).
std::vector<double> edt_sq(const std::vector<uint8_t>& feature, int h, int w) {
  std::vector<double> grid(static_cast<size_t>(h) * w);
  for (size_t i = 0; i < grid.size(); ++i)
    grid[i] = feature[i] ? 0.0 : kInf;

  const int n = std::max(h, w);
  std::vector<double> f(n), d(n);
  std::vector<int> v(n);
  std::vector<double> zbuf(n + 1);

  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<size_t>(y) * w + x];
    dt1d(f, d, h, v, zbuf);
    for (int y = 0; y < h; ++y) grid[static_cast<size_t>(y) * w + x] = d[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = grid[static_cast<size_t>(y) * w + x];
    dt1d(f, d, w, v, zbuf);
    for (int x = 0; x < w; ++x) grid[static_cast<size_t>(y) * w + x] = d[x];
  }
  return grid;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius < 1) throw ValidationError("dilate: radius must be >= 1");
  const int h = static_cast<int>(mask.height), w = static_cast<int>(mask.width);
  BinaryMask out = mask;
  if (mask.area() == 0) return out;
  const std::vector<double> d = edt_sq(mask.bits, h, w);
  const double r2 = static_cast<double>(radius) * radius;
  for (size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = d[i] <= r2;
  return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
  if (radius < 1) throw ValidationError("erode: radius must be >= 1");
  const int h = static_cast<int>(mask.height), w = static_cast<int>(mask.width);
  BinaryMask out = mask;
  if (mask.area() == 0) return out;

  // Out-of-bounds counts as background: pad the complement with a one-pixel
  // ring of background before the distance transform.
  const int ph = h + 2, pw = w + 2;
  std::vector<uint8_t> padded(static_cast<size_t>(ph) * pw, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      padded[static_cast<size_t>(y + 1) * pw + (x + 1)] = mask.at(y, x) ? 0 : 1;
  const std::vector<double> d = edt_sq(padded, ph, pw);
  const double r2 = static_cast<double>(radius) * radius;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.at(y, x) =
          mask.at(y, x) && d[static_cast<size_t>(y + 1) * pw + (x + 1)] > r2;
  return out;
}

namespace {
constexpr uint64_t kSignStream = 0x5349474Eull;  // "SIGN"
}

CorruptOp corrupt_op(const BinaryMask& mask, int radius, uint64_t seed,
                     uint64_t mask_index, uint32_t tau_min) {
  const CounterRng rng(seed, kSignStream);
  const bool dilation = (rng.word(mask_index) & 1ull) != 0;
  if (dilation) return CorruptOp::Dilation;
  if (erode(mask, radius).area() < tau_min) return CorruptOp::DilationGuard;
  return CorruptOp::Erosion;
}

BinaryMask corrupt_mask(const BinaryMask& mask, int radius, uint64_t seed,
                        uint64_t mask_index, uint32_t tau_min) {
  const CounterRng rng(seed, kSignStream);
  const bool dilation = (rng.word(mask_index) & 1ull) != 0;
  if (dilation) return dilate(mask, radius);
  BinaryMask eroded = erode(mask, radius);
  if (eroded.area() < tau_min) return dilate(mask, radius);  // guard
  return eroded;
}

std::vector<uint32_t> semantic_segment(
    const GaussianFeatureField& field,
    std::span<const QuerySet::Entry> class_embeddings) {
  for (const auto& c : class_embeddings)
    if (static_cast<uint32_t>(c.vec.size()) != field.dim)
      throw ValidationError("semantic_segment: class dimension mismatch");
  std::vector<uint32_t> labels(field.count(), kUnlabeled);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(field.count()); ++i) {
    if (field.weights[i] == 0.0f) continue;
    const auto z = field.feature_vec(i).cast<double>().eval();
    double best = -kInf;
    uint32_t best_c = kUnlabeled;
    for (uint32_t c = 0; c < class_embeddings.size(); ++c) {
      const double cosv = z.dot(class_embeddings[c].vec.cast<double>());
      if (cosv > best) {
        best = cosv;
        best_c = c;
      }
    }
    labels[i] = best_c;
  }
  return labels;
}

namespace {
constexpr char kMaskMagic[4] = {'V', 'M', 'S', 'K'};
}

BinaryMask load_mask(const std::filesystem::path& path) {
  detail::Reader r(path);
  r.expect_magic(kMaskMagic);
  r.expect_version(1);
  BinaryMask mask;
  mask.height = r.u32();
  mask.width = r.u32();
  const size_t n = detail::checked_count(
      static_cast<uint64_t>(mask.height) * mask.width, 1, "mask");
  mask.bits.resize(n);
  r.bytes(mask.bits.data(), n);
  r.expect_eof();
  for (uint8_t b : mask.bits)
    if (b > 1) throw ValidationError("mask values must be 0 or 1");
  return mask;
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  for (uint8_t b : mask.bits)
    if (b > 1) throw ValidationError("mask values must be 0 or 1");
  detail::Writer w(path);
  w.magic(kMaskMagic);
  w.u32(1);
  w.u32(mask.height);
  w.u32(mask.width);
  w.bytes(mask.bits.data(), mask.bits.size());
  w.close();
}

}  // namespace glift
