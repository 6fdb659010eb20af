#include "fairvec/audit.hpp"

#include <numeric>

#include "fairvec/error.hpp"

namespace fairvec {
namespace {

using nlohmann::json;

ScoredPairs pick(const ScoredPairs& scored, const std::vector<std::size_t>& idx) {
  ScoredPairs out;
  for (auto n : idx) {
    out.scores.push_back(scored.scores[n]);
    out.labels.push_back(scored.labels[n]);
  }
  return out;
}

json rates_json(const Confusion& c) {
  const auto r = rates(c);
  return {{"threshold", c.threshold}, {"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn},
          {"tar", r.tar}, {"far", r.far}, {"fnr", r.fnr}, {"tnr", r.tnr}, {"accuracy", r.accuracy}};
}

Confusion add(Confusion a, const Confusion& b) {
  a.tp += b.tp;
  a.fp += b.fp;
  a.tn += b.tn;
  a.fn += b.fn;
  return a;
}

json calibration(const ScoredPairs& scored, const PairList& pairs) {
  const int k_count = pairs.scheme.size();
  const bool in_sample = pairs.num_folds < 2;
  std::vector<double> t_g;
  std::vector<std::vector<double>> t_o(static_cast<std::size_t>(k_count));
  std::vector<Confusion> at_g(static_cast<std::size_t>(k_count));
  std::vector<Confusion> at_o(static_cast<std::size_t>(k_count));
  const int rounds = in_sample ? 1 : pairs.num_folds;
  for (int f = 0; f < rounds; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t n = 0; n < pairs.size(); ++n) {
      if (in_sample || pairs.fold_of_pair[n] != f) train.push_back(n);
      if (in_sample || pairs.fold_of_pair[n] == f) test.push_back(n);
    }
    PairList train_pairs;
    train_pairs.scheme = pairs.scheme;
    for (auto n : train) train_pairs.pairs.push_back(pairs.pairs[n]);
    const auto thresholds = calibrate_per_subgroup(pick(scored, train), train_pairs);
    t_g.push_back(thresholds.global);
    for (int k = 0; k < k_count; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      t_o[ks].push_back(thresholds.per_subgroup[ks]);
      std::vector<std::size_t> mine;
      for (auto n : test) {
        if (pairs.pairs[n].subgroup == k) mine.push_back(n);
      }
      const auto sub = pick(scored, mine);
      at_g[ks] = add(at_g[ks], confusion(sub, thresholds.global));
      at_o[ks] = add(at_o[ks], confusion(sub, thresholds.per_subgroup[ks]));
    }
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  json subgroups = json::array();
  for (int k = 0; k < k_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    subgroups.push_back({{"subgroup", to_string(pairs.scheme.decode(k))},
                         {"t_o", mean(t_o[ks])},
                         {"t_o_per_fold", t_o[ks]},
                         {"accuracy_at_t_g", rates(at_g[ks]).accuracy},
                         {"accuracy_at_t_o", rates(at_o[ks]).accuracy}});
  }
  return {{"fit_on", in_sample ? "all pairs" : "training folds"},
          {"reported_on", in_sample ? "all pairs" : "held-out fold"},
          {"t_g", mean(t_g)},
          {"t_g_per_fold", t_g},
          {"subgroups", subgroups}};
}

}  // namespace

DetCurves det_curves(const ScoredPairs& scored, const PairList& pairs, std::size_t points) {
  DetCurves out;
  out.pooled = det_curve(scored, points);
  for (int k = 0; k < pairs.scheme.size(); ++k) {
    out.subgroups.push_back(det_curve(restrict_to_subgroup(scored, pairs, k), points));
  }
  return out;
}

json run_audit(const EmbeddingSet& set, const PairList& pairs, const AuditOptions& options) {
  if (pairs.size() == 0) throw InputError("the pair list is empty");
  const auto scored = score_pairs(set, pairs);
  const int k_count = pairs.scheme.size();
  std::vector<ScoredPairs> per(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) per[static_cast<std::size_t>(k)] = restrict_to_subgroup(scored, pairs, k);
  auto label = [&](int k) { return to_string(pairs.scheme.decode(k)); };

  json counts{{"genuine", count_label(pairs, PairLabel::genuine)},
              {"imposter", count_label(pairs, PairLabel::imposter)},
              {"subgroups", json::array()}};
  for (int k = 0; k < k_count; ++k) {
    const auto& s = per[static_cast<std::size_t>(k)];
    const auto g = std::count(s.labels.begin(), s.labels.end(), std::uint8_t{1});
    counts["subgroups"].push_back({{"subgroup", label(k)},
                                   {"genuine", g},
                                   {"imposter", static_cast<std::int64_t>(s.size()) - g}});
  }

  json global = json::array();
  json per_threshold = json::array();
  for (double target : options.far_targets) {
    json g{{"target_far", target}};
    try {
      const auto t = threshold_for_far(scored, target);
      const auto audit = subgroup_far_audit(scored, pairs, t.threshold);
      g["reachable"] = true;
      g["threshold"] = t.threshold;
      g["achieved_far"] = t.achieved_far;
      g["tar"] = rates(confusion(scored, t.threshold)).tar;
      g["subgroups"] = json::array();
      for (const auto& s : audit.subgroups) {
        const auto& sub = per[static_cast<std::size_t>(s.subgroup)];
        g["subgroups"].push_back({{"subgroup", label(s.subgroup)},
                                  {"actual_far", s.actual_far},
                                  {"percent_difference", s.percent_difference},
                                  {"tar", rates(confusion(sub, t.threshold)).tar}});
      }
    } catch (const NumericError&) {
      g["reachable"] = false;
      g["threshold"] = nullptr;
      g["achieved_far"] = nullptr;
      g["tar"] = nullptr;
      g["subgroups"] = json::array();
      for (int k = 0; k < k_count; ++k) {
        g["subgroups"].push_back(
            {{"subgroup", label(k)}, {"actual_far", nullptr}, {"percent_difference", nullptr}, {"tar", nullptr}});
      }
    }
    global.push_back(g);

    json o{{"target_far", target}, {"subgroups", json::array()}};
    for (int k = 0; k < k_count; ++k) {
      const auto& sub = per[static_cast<std::size_t>(k)];
      json entry{{"subgroup", label(k)}};
      try {
        const auto t = threshold_for_far(sub, target);
        entry["reachable"] = true;
        entry["threshold"] = t.threshold;
        entry["achieved_far"] = t.achieved_far;
        entry["percent_difference"] = percent_difference(target, t.achieved_far);
        entry["tar"] = rates(confusion(sub, t.threshold)).tar;
      } catch (const NumericError&) {
        entry["reachable"] = false;
        entry["threshold"] = nullptr;
        entry["achieved_far"] = nullptr;
        entry["percent_difference"] = nullptr;
        entry["tar"] = nullptr;
      }
      o["subgroups"].push_back(entry);
    }
    per_threshold.push_back(o);
  }

  json distribution = json::array();
  for (const auto& d : score_distribution_summary(scored, pairs)) {
    auto q = [](const Quantiles& x) {
      return json{{"mean", x.mean}, {"median", x.median}, {"p5", x.p5}, {"p95", x.p95}};
    };
    distribution.push_back({{"subgroup", label(d.subgroup)}, {"genuine", q(d.genuine)}, {"imposter", q(d.imposter)}});
  }

  auto det_json = [](const std::vector<DetPoint>& pts) {
    json a = json::array();
    for (const auto& p : pts) a.push_back({{"threshold", p.threshold}, {"far", p.far}, {"fnr", p.fnr}});
    return a;
  };
  const auto curves = det_curves(scored, pairs, options.det_points);
  json det{{"pooled", det_json(curves.pooled)}, {"subgroups", json::object()}};
  for (int k = 0; k < k_count; ++k) det["subgroups"][label(k)] = det_json(curves.subgroups[static_cast<std::size_t>(k)]);

  json subgroups = json::array();
  for (int k = 0; k < k_count; ++k) subgroups.push_back(label(k));
  return {{"dim", set.dim},
          {"samples", set.size()},
          {"subgroup_order", subgroups},
          {"far_targets", options.far_targets},
          {"counts", counts},
          {"global", global},
          {"per_subgroup_threshold", per_threshold},
          {"calibration", calibration(scored, pairs)},
          {"pooled_at_t_g", rates_json(confusion(scored, calibrate_global(scored)))},
          {"distribution", distribution},
          {"det", det}};
}

}  // namespace fairvec
