#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace fairvec::oracle {

Counts count_at(const Scored& s, double threshold) {
  Counts c;
  for (std::size_t n = 0; n < s.scores.size(); ++n) {
    const bool accept = s.scores[n] > threshold;
    const bool genuine = s.labels[n] == 1;
    if (genuine && accept) c.tp++;
    if (genuine && !accept) c.fn++;
    if (!genuine && accept) c.fp++;
    if (!genuine && !accept) c.tn++;
  }
  return c;
}

Rates rates_of(const Counts& c) {
  Rates r;
  const double p = static_cast<double>(c.tp + c.fn);
  const double q = static_cast<double>(c.fp + c.tn);
  r.tar = c.tp / p;
  r.fnr = c.fn / p;
  r.far = c.fp / q;
  r.tnr = c.tn / q;
  r.acc = (c.tp + c.tn) / (p + q);
  return r;
}

std::vector<double> candidates(const Scored& s) {
  std::set<double> distinct(s.scores.begin(), s.scores.end());
  std::vector<double> v(distinct.begin(), distinct.end());
  std::vector<double> out{v.front() - 1.0};
  for (std::size_t n = 1; n < v.size(); ++n) {
    const double mid = v[n - 1] + (v[n] - v[n - 1]) / 2.0;
    out.push_back(mid > v[n - 1] && mid < v[n] ? mid : v[n - 1]);
  }
  out.push_back(v.back() + 1.0);
  return out;
}

double best_threshold(const Scored& s) {
  double best = 0.0;
  std::int64_t best_correct = -1;
  for (double t : candidates(s)) {
    const auto c = count_at(s, t);
    if (c.tp + c.tn > best_correct) {
      best_correct = c.tp + c.tn;
      best = t;
    }
  }
  return best;
}

double far_threshold(const Scored& s, double target) {
  const auto cand = candidates(s);
  for (double t : cand) {
    const auto c = count_at(s, t);
    if (static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn) <= target) return t;
  }
  return cand.back();
}

std::vector<DetRow> det(const Scored& s, std::size_t points) {
  std::vector<DetRow> full;
  for (double t : candidates(s)) {
    const auto r = rates_of(count_at(s, t));
    full.push_back({t, r.far, r.fnr});
  }
  if (points == 0 || points >= full.size()) return full;
  std::vector<DetRow> out;
  if (points == 1) return {full.front()};
  for (std::size_t n = 0; n < points; ++n) {
    const double pos = static_cast<double>(n) * static_cast<double>(full.size() - 1) /
                       static_cast<double>(points - 1);
    out.push_back(full[static_cast<std::size_t>(std::llround(pos))]);
  }
  return out;
}

Scored only_subgroup(const Scored& s, int k) {
  Scored out;
  for (std::size_t n = 0; n < s.scores.size(); ++n) {
    if (s.subgroup[n] != k) continue;
    out.scores.push_back(s.scores[n]);
    out.labels.push_back(s.labels[n]);
    out.subgroup.push_back(k);
  }
  return out;
}

Scored random_scored(Rng& rng, std::size_t n, int k, bool ties) {
  Scored s;
  for (std::size_t i = 0; i < n; ++i) {
    const int g = static_cast<int>(i % static_cast<std::size_t>(k));
    // The first two pairs of each subgroup fix one of each class.
    const bool genuine = i < 2 * static_cast<std::size_t>(k) ? (i / static_cast<std::size_t>(k)) == 0
                                                              : rng.uniform() < 0.35;
    double score = (genuine ? 0.45 : 0.1) + 0.05 * g + 0.25 * rng.normal();
    if (ties) score = std::round(score * 20.0) / 20.0;
    s.scores.push_back(std::clamp(score, -1.0, 1.0));
    s.labels.push_back(genuine ? 1 : 0);
    s.subgroup.push_back(g);
  }
  return s;
}

EmbeddingSet random_set(Rng& rng, std::size_t dim, int subjects_per_subgroup, int per_subject,
                        bool full_scheme) {
  std::vector<Embedding> records;
  const std::vector<Ethnicity> eth = full_scheme
                                         ? std::vector<Ethnicity>{Ethnicity::A, Ethnicity::B, Ethnicity::I, Ethnicity::W}
                                         : std::vector<Ethnicity>{Ethnicity::B, Ethnicity::W};
  int subject = 100;
  for (auto e : eth) {
    for (auto g : {Gender::F, Gender::M}) {
      for (int s = 0; s < subjects_per_subgroup; ++s, ++subject) {
        for (int n = 0; n < per_subject; ++n) {
          Embedding rec;
          rec.sample_id = "s" + std::to_string(subject) + "_" + std::to_string(n);
          rec.source_subject = std::to_string(subject);
          rec.subgroup = {e, g};
          for (std::size_t c = 0; c < dim; ++c) rec.vector.push_back(static_cast<float>(rng.normal()));
          records.push_back(std::move(rec));
        }
      }
    }
  }
  return make_embedding_set(std::move(records), dim, Provenance::loaded);
}

}  // namespace fairvec::oracle
