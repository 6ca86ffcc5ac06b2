#include "ungan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ungan {

double mse(const Image<float>& a, const Image<float>& b) {
  require_same_shape(a, b, "mse");
  if (a.data.size() == 0) throw ShapeError("mse: empty image");
  return (a.data.cast<double>() - b.data.cast<double>()).squaredNorm() / double(a.data.size());
}

double ssim(const Image<float>& a, const Image<float>& b, const SsimSettings& s) {
  require_same_shape(a, b, "ssim");
  const int k = s.window;
  if (k <= 0 || k % 2 == 0) throw RangeError("ssim: window must be a positive odd size");
  if (a.shape.height < k || a.shape.width < k)
    throw ShapeError("ssim: image " + to_string(a.shape) + " is smaller than the " + std::to_string(k) + "x" +
                     std::to_string(k) + " window");

  std::vector<double> g1(static_cast<std::size_t>(k));
  double total = 0;
  for (int i = 0; i < k; ++i) {
    const double d = i - (k - 1) / 2.0;
    g1[std::size_t(i)] = std::exp(-d * d / (2 * s.sigma * s.sigma));
    total += g1[std::size_t(i)];
  }
  for (auto& v : g1) v /= total;

  const double c1 = (s.k1 * 1.0) * (s.k1 * 1.0);
  const double c2 = (s.k2 * 1.0) * (s.k2 * 1.0);
  const int oh = a.shape.height - k + 1, ow = a.shape.width - k + 1;
  double sum = 0;
  for (int c = 0; c < a.shape.channels; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) {
            const double w = g1[std::size_t(dy)] * g1[std::size_t(dx)];
            const double u = a.at(y + dy, x + dx, c), v = b.at(y + dy, x + dx, c);
            mx += w * u;
            my += w * v;
            xx += w * u * u;
            yy += w * v * v;
            xy += w * u * v;
          }
        }
        const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
        sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
  }
  return sum / (double(oh) * ow * a.shape.channels);
}

double psnr(const Image<float>& a, const Image<float>& b) {
  const double m = mse(a, b);
  if (m == 0) return kPsnrCap;
  return 10.0 * std::log10(1.0 / m);
}

UtilityReport utility(const Image<float>& a, const Image<float>& b) { return {mse(a, b), ssim(a, b), psnr(a, b)}; }

Vector<float> identity_embedding(const IdentityEmbedder<float>& embedder, const Image<float>& x) {
  Vector<float> e = extract_features(embedder, x);
  const float n = e.norm();
  if (n > 0) e /= n;
  return e;
}

double face_distance(const IdentityEmbedder<float>& embedder, const Image<float>& a, const Image<float>& b) {
  require_same_shape(a, b, "face_distance");
  return double((identity_embedding(embedder, a) - identity_embedding(embedder, b)).norm());
}

double false_accept_rate(const std::vector<LabeledDistance>& pairs, double threshold) {
  int n = 0, wrong = 0;
  for (const auto& p : pairs) {
    if (p.same) continue;
    ++n;
    wrong += p.distance < threshold;
  }
  return n ? double(wrong) / n : 0.0;
}

double false_reject_rate(const std::vector<LabeledDistance>& pairs, double threshold) {
  int n = 0, wrong = 0;
  for (const auto& p : pairs) {
    if (!p.same) continue;
    ++n;
    wrong += p.distance >= threshold;
  }
  return n ? double(wrong) / n : 0.0;
}

ThresholdCalibration calibrate_threshold(const std::vector<LabeledDistance>& pairs) {
  const bool any_same = std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.same; });
  const bool any_diff = std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return !p.same; });
  if (!any_same || !any_diff) throw Error("calibrate_threshold: needs both same and different pairs");
  std::vector<double> d;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.distance) || p.distance < 0) throw RangeError("calibrate_threshold: invalid distance");
    d.push_back(p.distance);
  }
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  if (d.size() < 2) throw Error("calibrate_threshold: all distances are equal");

  ThresholdCalibration best;
  best.equal_error_rate = 2.0;
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    const double t = 0.5 * (d[i] + d[i + 1]);
    const double err = std::max(false_accept_rate(pairs, t), false_reject_rate(pairs, t));
    if (err < best.equal_error_rate) {
      best.equal_error_rate = err;
      best.threshold = t;
    }
  }
  best.pairs_used = int(pairs.size());
  best.reliable = best.equal_error_rate <= kUnreliableEer;
  best.pairs = pairs;
  return best;
}

std::vector<LabeledDistance> identity_pairs(const IdentityEmbedder<float>& embedder, const Dataset& dataset,
                                            int pairs_per_class, std::uint64_t seed) {
  if (!dataset.has_identities()) throw Error("identity_pairs: dataset has no identity labels");
  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset.identities[i] >= 0) by_id[dataset.identities[i]].push_back(i);
  std::vector<const std::vector<std::size_t>*> multi;
  std::vector<int> ids;
  for (const auto& [id, members] : by_id) {
    ids.push_back(id);
    if (members.size() >= 2) multi.push_back(&members);
  }
  if (multi.empty() || ids.size() < 2) throw Error("identity_pairs: need repeated identities and at least two ids");

  std::vector<Vector<float>> emb;
  emb.reserve(dataset.size());
  for (const auto& img : dataset.images) emb.push_back(identity_embedding(embedder, img));

  Rng rng(seed);
  auto pick = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::vector<LabeledDistance> out;
  for (int i = 0; i < pairs_per_class; ++i) {
    const auto& members = *multi[pick(multi.size())];
    const std::size_t a = pick(members.size());
    std::size_t b = pick(members.size() - 1);
    if (b >= a) ++b;
    out.push_back({double((emb[members[a]] - emb[members[b]]).norm()), true});
  }
  for (int i = 0; i < pairs_per_class; ++i) {
    const std::size_t ia = pick(ids.size());
    std::size_t ib = pick(ids.size() - 1);
    if (ib >= ia) ++ib;
    const auto& ma = by_id.at(ids[ia]);
    const auto& mb = by_id.at(ids[ib]);
    out.push_back({double((emb[ma[pick(ma.size())]] - emb[mb[pick(mb.size())]]).norm()), false});
  }
  return out;
}

MatchVerdict verify(const IdentityEmbedder<float>& embedder, const ThresholdCalibration& calibration,
                    const Image<float>& a, const Image<float>& b) {
  const double d = face_distance(embedder, a, b);
  return {d, d < calibration.threshold};
}

double matching_rate(const std::vector<double>& distances, const ThresholdCalibration& calibration) {
  if (distances.empty()) throw Error("matching_rate: empty input");
  const auto hits = std::count_if(distances.begin(), distances.end(),
                                  [&](double d) { return d < calibration.threshold; });
  return double(hits) / double(distances.size());
}

double matching_rate(const IdentityEmbedder<float>& embedder, const std::vector<Image<float>>& targets,
                     const std::vector<Image<float>>& reconstructions, const ThresholdCalibration& calibration) {
  if (targets.size() != reconstructions.size()) throw ShapeError("matching_rate: list lengths differ");
  std::vector<double> d;
  d.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) d.push_back(face_distance(embedder, targets[i], reconstructions[i]));
  return matching_rate(d, calibration);
}

}  // namespace ungan
