#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fairvec/audit.hpp"
#include "fairvec/checkpoint.hpp"
#include "fairvec/debias.hpp"
#include "fairvec/embedding_store.hpp"
#include "fairvec/error.hpp"
#include "fairvec/pairing.hpp"
#include "fairvec/probe.hpp"
#include "fairvec/svg.hpp"
#include "fairvec/synthetic_data.hpp"
#include "manifest.hpp"

namespace fairvec::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::shared_ptr<spdlog::logger> make_logger() {
  auto log = spdlog::stderr_color_st("fairvec");
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("FAIRVEC_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only honour names it really knows.
    if (level != spdlog::level::off || std::string_view(env) == "off") log->set_level(level);
  }
  return log;
}

spdlog::logger& logger() {
  static auto log = make_logger();
  return *log;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

json read_json(const fs::path& path, const std::string& role) {
  if (!fs::exists(path)) throw IoError("missing " + role + ": " + path.string());
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw InputError(role + " " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num_or_empty(const json& v) { return v.is_null() ? "" : num(v.get<double>()); }

std::vector<double> parse_far_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(v > 0.0 && v < 1.0)) {
      throw InputError("bad FAR target '" + item + "' (want a number in (0, 1))");
    }
    out.push_back(v);
  }
  if (out.empty()) throw InputError("--far-targets is empty");
  return out;
}

EmbeddingSet load_set(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such embeddings file: " + path.string());
  return load_embeddings(path, format_for_path(path));
}

std::string extension(EmbeddingFormat f) { return f == EmbeddingFormat::csv ? ".csv" : ".fve"; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format;
  std::string save_config;
};

int cmd_generate(const GenerateArgs& a) {
  SyntheticConfig config;
  if (!a.config.empty()) {
    config = load_synthetic_config(a.config);
    if (a.seed) config.seed = *a.seed;
  } else {
    config = default_biased_config(a.seed.value_or(0));
  }
  const auto set = generate(config);
  const fs::path out(a.out);
  const auto format = a.format.empty() ? format_for_path(out) : parse_format(a.format);
  const auto dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  ensure_dir(dir);
  save_embeddings(set, out, format);

  Manifest m("generate", to_json(config));
  m.seed("generator", config.seed);
  if (!a.config.empty()) m.input("config", a.config);
  m.output(out);
  if (!a.save_config.empty()) {
    save_synthetic_config(config, a.save_config);
    m.output(a.save_config);
  }
  m.write(dir);
  logger().info("wrote {} embeddings of dim {} to {}", set.size(), set.dim, out.string());
  return kOk;
}

// ---------------------------------------------------------------- pairs

struct PairsArgs {
  std::string embeddings;
  std::string folds;
  int num_folds = 5;
  double ratio = 2.84;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_pairs(const PairsArgs& a) {
  const auto set = load_set(a.embeddings);
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  Manifest m("pairs", {{"num_folds", a.num_folds}, {"imposter_ratio", a.ratio}});
  m.input("embeddings", a.embeddings);
  FoldAssignment folds;
  if (!a.folds.empty()) {
    folds = load_folds(set, a.folds);
    m.input("folds", a.folds);
  } else {
    folds = assign_folds(set, a.num_folds, a.seed);
    m.seed("folds", a.seed);
  }
  const auto pairs = build_pairs(set, folds, PairPolicy{a.ratio, a.seed});
  m.seed("pairs", a.seed);
  save_folds(set, folds, dir / "folds.csv");
  save_pairs(set, pairs, dir / "pairs.csv");
  m.output(dir / "folds.csv");
  m.output(dir / "pairs.csv");
  m.write(dir);
  logger().info("{} genuine and {} imposter pairs over {} folds", count_label(pairs, PairLabel::genuine),
                count_label(pairs, PairLabel::imposter), folds.num_folds);
  return kOk;
}

// ---------------------------------------------------------------- audit

struct AuditArgs {
  std::string embeddings;
  std::string pairs;
  std::string far_targets;
  std::size_t det_points = 200;
  std::string out_dir;
};

std::string det_csv(const std::vector<DetPoint>& pts) {
  std::string out = "threshold,far,fnr\n";
  for (const auto& p : pts) out += num(p.threshold) + "," + num(p.far) + "," + num(p.fnr) + "\n";
  return out;
}

svg::LineChart det_chart(const std::string& title, const json& det) {
  svg::LineChart chart{title, "FAR", "FNR", true, true, {}};
  auto series = [](const std::string& name, const json& pts) {
    svg::Series s{name, {}, {}};
    for (const auto& p : pts) {
      s.x.push_back(p.at("far").get<double>());
      s.y.push_back(p.at("fnr").get<double>());
    }
    return s;
  };
  for (const auto& [name, pts] : det.at("subgroups").items()) chart.series.push_back(series(name, pts));
  chart.series.push_back(series("pooled", det.at("pooled")));
  return chart;
}

int cmd_audit(const AuditArgs& a) {
  const auto set = load_set(a.embeddings);
  if (!fs::exists(a.pairs)) throw IoError("no such pair file: " + a.pairs);
  const auto pairs = load_pairs(set, a.pairs);
  AuditOptions options;
  if (!a.far_targets.empty()) options.far_targets = parse_far_list(a.far_targets);
  options.det_points = a.det_points;
  const auto report = run_audit(set, pairs, options);

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  Manifest m("audit", {{"far_targets", options.far_targets}, {"det_points", options.det_points}});
  m.input("embeddings", a.embeddings);
  m.input("pairs", a.pairs);
  write_json(dir / "audit.json", report);
  m.output(dir / "audit.json");

  const auto curves = det_curves(score_pairs(set, pairs), pairs, options.det_points);
  write_text(dir / "det_pooled.csv", det_csv(curves.pooled));
  m.output(dir / "det_pooled.csv");
  for (int k = 0; k < pairs.scheme.size(); ++k) {
    const auto name = "det_" + to_string(pairs.scheme.decode(k)) + ".csv";
    write_text(dir / name, det_csv(curves.subgroups[static_cast<std::size_t>(k)]));
    m.output(dir / name);
  }
  write_text(dir / "det.svg", svg::render(det_chart("DET", report.at("det"))));
  m.output(dir / "det.svg");
  m.write(dir);
  return kOk;
}

// ---------------------------------------------------------------- debias

struct DebiasArgs {
  std::string embeddings;
  std::string folds;
  std::string config;
  std::optional<double> lambda;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string format;
  std::string out_dir;
};

int cmd_debias(const DebiasArgs& a) {
  const auto set = load_set(a.embeddings);
  if (!fs::exists(a.folds)) throw IoError("no such fold file: " + a.folds);
  const auto folds = load_folds(set, a.folds);
  TrainConfig config;
  if (!a.config.empty()) config = train_config_from_json(read_json(a.config, "train config"));
  if (a.lambda) config.lambda = *a.lambda;
  if (a.epochs) config.max_epochs = *a.epochs;
  if (a.seed) config.seed = *a.seed;
  if (a.threads < 1) throw InputError("--threads must be at least 1");

  const auto run = run_debias(set, folds, config, a.threads);
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  const auto format = a.format.empty() ? EmbeddingFormat::binary : parse_format(a.format);
  Manifest m("debias", to_json(config));
  m.seed("train", config.seed);
  m.input("embeddings", a.embeddings);
  m.input("folds", a.folds);
  if (!a.config.empty()) m.input("train_config", a.config);

  const auto debiased = dir / ("debiased" + extension(format));
  save_embeddings(run.debiased, debiased, format);
  m.output(debiased);
  write_json(dir / "train_config.json", to_json(config));
  m.output(dir / "train_config.json");
  json folds_json = json::array();
  for (const auto& f : run.folds) {
    const auto stem = "fold" + std::to_string(f.fold);
    const auto view = dir / (stem + "_view" + extension(format));
    save_embeddings(f.view, view, format);
    save_epoch_log(f.logs, dir / (stem + "_epochs.csv"));
    const json sidecar{{"networks", {{{"name", "trunk"}, {"layers", describe(f.model.trunk)}},
                                     {{"name", "id_head"}, {"layers", describe(f.model.id_head)}},
                                     {{"name", "att_head"}, {"layers", describe(f.model.att_head)}}}},
                       {"fold", f.fold},
                       {"selected_epoch", f.selected_epoch},
                       {"optimizer", to_json(config)}};
    save_checkpoint({&f.model.trunk, &f.model.id_head, &f.model.att_head}, dir / (stem + ".fvnn"), sidecar);
    for (const auto& p : {view, dir / (stem + "_epochs.csv"), dir / (stem + ".fvnn"),
                          sidecar_path(dir / (stem + ".fvnn"))}) {
      m.output(p);
    }
    folds_json.push_back({{"fold", f.fold}, {"selected_epoch", f.selected_epoch}, {"epochs_run", f.logs.size()}});
    logger().info("fold {}: selected epoch {} of {}", f.fold, f.selected_epoch, f.logs.size());
  }
  write_json(dir / "folds.json", folds_json);
  m.output(dir / "folds.json");
  m.write(dir);
  return kOk;
}

// ---------------------------------------------------------------- probe

struct ProbeArgs {
  std::string embeddings;
  std::vector<std::string> views;
  std::string folds;
  std::optional<int> epochs;
  std::uint64_t seed = 0;
  bool shuffle_labels = false;
  bool no_early_stop = false;
  std::string out_dir;
};

int cmd_probe(const ProbeArgs& a) {
  if (a.embeddings.empty() == a.views.empty()) {
    throw InputError("give exactly one of --embeddings or --views");
  }
  std::vector<EmbeddingSet> sets;
  std::vector<std::string> paths = a.views.empty() ? std::vector<std::string>{a.embeddings} : a.views;
  for (const auto& p : paths) sets.push_back(load_set(p));
  if (!fs::exists(a.folds)) throw IoError("no such fold file: " + a.folds);
  const auto folds = load_folds(sets[0], a.folds);
  if (a.shuffle_labels) {
    for (auto& s : sets) s = shuffle_subgroup_labels(s, derive_seed(a.seed, 0x5348554646ULL));
  }
  ProbeConfig config;
  config.seed = a.seed;
  if (a.epochs) config.epochs = *a.epochs;
  if (a.no_early_stop) config.early_stop = false;

  auto models = train_probe(sets, folds, config);
  const auto report = evaluate_probe(models, sets, folds);

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  auto cfg = to_json(config);
  cfg["shuffle_labels"] = a.shuffle_labels;
  cfg["views"] = paths.size();
  Manifest m("probe", cfg);
  m.seed("probe", config.seed);
  for (const auto& p : paths) m.input(a.views.empty() ? "embeddings" : "view", p);
  m.input("folds", a.folds);
  auto j = to_json(report);
  json epochs = json::array();
  for (const auto& f : models) epochs.push_back(f.epoch_loss.size());
  j["epochs_run"] = epochs;
  write_json(dir / "probe.json", j);
  save_confusion_csv(report, dir / "confusion.csv");
  write_text(dir / "confusion.svg", svg::heatmap("Subgroup probe confusion", report.labels, report.confusion));
  for (const auto* name : {"probe.json", "confusion.csv", "confusion.svg"}) m.output(dir / name);
  m.write(dir);
  logger().info("probe accuracy {:.4f}", report.accuracy);
  return kOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::string audit_baseline;
  std::string audit_debiased;
  std::string probe_baseline;
  std::string probe_debiased;
  std::string out_dir;
};

// Mean of a list that may contain nulls; null if any entry is.
json mean_or_null(const std::vector<json>& values) {
  double sum = 0.0;
  for (const auto& v : values) {
    if (v.is_null()) return nullptr;
    sum += v.get<double>();
  }
  return values.empty() ? json(nullptr) : json(sum / static_cast<double>(values.size()));
}

// Population standard deviation, null if any entry is null.
json stddev_or_null(const std::vector<json>& values) {
  const auto mean = mean_or_null(values);
  if (mean.is_null()) return nullptr;
  double ss = 0.0;
  for (const auto& v : values) ss += std::pow(v.get<double>() - mean.get<double>(), 2);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

json spread_or_null(const std::vector<json>& values) {
  if (values.empty()) return nullptr;
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (values[n].is_null()) return nullptr;
    const auto v = values[n].get<double>();
    lo = n ? std::min(lo, v) : v;
    hi = n ? std::max(hi, v) : v;
  }
  return hi - lo;
}

int cmd_report(const ReportArgs& a) {
  const auto audit_b = read_json(a.audit_baseline, "baseline audit");
  const auto audit_d = read_json(a.audit_debiased, "debiased audit");
  const auto probe_b_json = read_json(a.probe_baseline, "baseline probe report");
  const auto probe_d_json = read_json(a.probe_debiased, "debiased probe report");
  const auto probe_b = probe_report_from_json(probe_b_json);
  const auto probe_d = probe_report_from_json(probe_d_json);

  json table3;
  std::vector<std::string> labels;
  std::vector<double> targets;
  try {
    labels = audit_b.at("subgroup_order").get<std::vector<std::string>>();
    targets = audit_b.at("far_targets").get<std::vector<double>>();
    if (audit_d.at("subgroup_order") != audit_b.at("subgroup_order") ||
        audit_d.at("far_targets") != audit_b.at("far_targets")) {
      throw InputError("the two audits differ in subgroups or FAR targets");
    }
    // tar[method][target][subgroup]
    auto tar_of = [&](const json& audit, const char* block, std::size_t t, std::size_t k) {
      return audit.at(block).at(t).at("subgroups").at(k).at("tar");
    };
    const std::vector<std::pair<std::string, std::function<json(std::size_t, std::size_t)>>> methods{
        {"baseline", [&](std::size_t t, std::size_t k) { return tar_of(audit_b, "global", t, k); }},
        {"debiased", [&](std::size_t t, std::size_t k) { return tar_of(audit_d, "global", t, k); }},
        {"subgroup_threshold",
         [&](std::size_t t, std::size_t k) { return tar_of(audit_b, "per_subgroup_threshold", t, k); }}};
    json rows = json::array();
    json summary = json::array();
    for (const auto& [name, get] : methods) {
      json per_target = json::array();
      for (std::size_t t = 0; t < targets.size(); ++t) {
        std::vector<json> values;
        for (std::size_t k = 0; k < labels.size(); ++k) values.push_back(get(t, k));
        per_target.push_back({{"target_far", targets[t]},
                              {"tar", values},
                              {"mean", mean_or_null(values)},
                              {"std", stddev_or_null(values)}});
      }
      summary.push_back({{"method", name}, {"targets", per_target}});
    }
    for (std::size_t k = 0; k <= labels.size(); ++k) {
      for (std::size_t mth = 0; mth < methods.size(); ++mth) {
        json row{{"subgroup", k < labels.size() ? labels[k] : "Avg"}, {"method", methods[mth].first}};
        json values = json::array();
        for (std::size_t t = 0; t < targets.size(); ++t) {
          const auto& entry = summary[mth]["targets"][t];
          values.push_back(k < labels.size() ? entry["tar"][k] : entry["mean"]);
        }
        row["tar"] = values;
        rows.push_back(row);
      }
    }
    table3 = {{"far_targets", targets}, {"rows", rows}, {"methods", summary}};
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed audit file: ") + e.what());
  }

  auto pd_spread = [&](const json& audit) {
    json out = json::array();
    for (const auto& g : audit.at("global")) {
      std::vector<json> values;
      for (const auto& s : g.at("subgroups")) values.push_back(s.at("percent_difference"));
      out.push_back({{"target_far", g.at("target_far")}, {"spread", spread_or_null(values)}});
    }
    return out;
  };
  auto calibration_spread = [&](const json& audit) {
    std::vector<json> values;
    for (const auto& s : audit.at("calibration").at("subgroups")) values.push_back(s.at("accuracy_at_t_g"));
    return spread_or_null(values);
  };

  const auto gap = privacy_gap(probe_b, probe_d);
  json table4 = json::array();
  for (std::size_t k = 0; k <= probe_b.labels.size(); ++k) {
    const bool avg = k == probe_b.labels.size();
    table4.push_back({{"subgroup", avg ? "Average" : probe_b.labels[k]},
                      {"baseline", {{"precision", avg ? probe_b.avg_precision : probe_b.precision[k]},
                                    {"recall", avg ? probe_b.avg_recall : probe_b.recall[k]},
                                    {"f1", avg ? probe_b.avg_f1 : probe_b.f1[k]}}},
                      {"debiased", {{"precision", avg ? probe_d.avg_precision : probe_d.precision[k]},
                                    {"recall", avg ? probe_d.avg_recall : probe_d.recall[k]},
                                    {"f1", avg ? probe_d.avg_f1 : probe_d.f1[k]}}}});
  }

  json report{{"subgroup_order", labels},
              {"far_targets", targets},
              {"table3", table3},
              {"percent_difference_spread",
               {{"baseline", pd_spread(audit_b)}, {"debiased", pd_spread(audit_d)}}},
              {"accuracy_at_t_g_spread",
               {{"baseline", calibration_spread(audit_b)}, {"debiased", calibration_spread(audit_d)}}},
              {"table4", table4},
              {"probe_accuracy", {{"baseline", probe_b.accuracy}, {"debiased", probe_d.accuracy}}},
              {"privacy_gap", to_json(gap)}};

  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  Manifest m("report", json::object());
  m.input("audit_baseline", a.audit_baseline);
  m.input("audit_debiased", a.audit_debiased);
  m.input("probe_baseline", a.probe_baseline);
  m.input("probe_debiased", a.probe_debiased);
  write_json(dir / "report.json", report);

  std::string csv = "subgroup,method";
  for (double t : targets) csv += ",tar_at_far_" + num(t);
  csv += "\n";
  for (const auto& row : table3["rows"]) {
    csv += row["subgroup"].get<std::string>() + "," + row["method"].get<std::string>();
    for (const auto& v : row["tar"]) csv += "," + num_or_empty(v);
    csv += "\n";
  }
  write_text(dir / "table3.csv", csv);

  std::string csv4 =
      "subgroup,baseline_precision,baseline_recall,baseline_f1,debiased_precision,debiased_recall,debiased_f1\n";
  for (const auto& row : table4) {
    csv4 += row["subgroup"].get<std::string>();
    for (const char* side : {"baseline", "debiased"}) {
      for (const char* metric : {"precision", "recall", "f1"}) csv4 += "," + num(row[side][metric].get<double>());
    }
    csv4 += "\n";
  }
  write_text(dir / "table4.csv", csv4);

  write_text(dir / "det_baseline.svg", svg::render(det_chart("DET, baseline", audit_b.at("det"))));
  write_text(dir / "det_debiased.svg", svg::render(det_chart("DET, debiased", audit_d.at("det"))));

  svg::BarChart pd{"Percent difference from target FAR, baseline", "percent", labels, {}};
  for (const auto& g : audit_b.at("global")) {
    svg::Series s{"FAR " + num(g.at("target_far").get<double>()), {}, {}};
    for (const auto& sub : g.at("subgroups")) {
      s.y.push_back(sub.at("percent_difference").is_null() ? 0.0 : sub.at("percent_difference").get<double>());
    }
    pd.groups.push_back(s);
  }
  write_text(dir / "percent_difference.svg", svg::render(pd));

  svg::BarChart f1{"Subgroup probe F1", "F1", probe_b.labels, {{"baseline", {}, probe_b.f1}, {"debiased", {}, probe_d.f1}}};
  write_text(dir / "probe_f1.svg", svg::render(f1));
  write_text(dir / "confusion_baseline.svg", svg::heatmap("Probe confusion, baseline", probe_b.labels, probe_b.confusion));
  write_text(dir / "confusion_debiased.svg", svg::heatmap("Probe confusion, debiased", probe_d.labels, probe_d.confusion));

  for (const auto* name : {"report.json", "table3.csv", "table4.csv", "det_baseline.svg", "det_debiased.svg",
                           "percent_difference.svg", "probe_f1.svg", "confusion_baseline.svg",
                           "confusion_debiased.svg"}) {
    m.output(dir / name);
  }
  m.write(dir);
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"fairvec: bias audit and adversarial debiasing of verification embeddings", "fairvec"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FAIRVEC_VERSION_STRING);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic embedding set");
  g->add_option("--config", gen.config, "Synthetic config JSON (default: the built-in biased config)");
  g->add_option("-o,--out", gen.out, "Output embedding file")->required();
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--format", gen.format, "csv or binary (default: from the file extension)")
      ->check(CLI::IsMember({"csv", "binary"}));
  g->add_option("--save-config", gen.save_config, "Also write the resolved config as JSON");

  PairsArgs pa;
  auto* p = app.add_subcommand("pairs", "Assign folds and build genuine/imposter pairs");
  p->add_option("--embeddings", pa.embeddings)->required();
  p->add_option("--folds", pa.folds, "Existing fold file (default: assign new folds)");
  p->add_option("--num-folds", pa.num_folds)->capture_default_str();
  p->add_option("--imposter-ratio", pa.ratio)->capture_default_str();
  p->add_option("--seed", pa.seed)->capture_default_str();
  p->add_option("--out-dir", pa.out_dir)->required();

  AuditArgs au;
  auto* a = app.add_subcommand("audit", "Threshold, FAR, TAR and DET audit per subgroup");
  a->add_option("--embeddings", au.embeddings)->required();
  a->add_option("--pairs", au.pairs)->required();
  a->add_option("--far-targets", au.far_targets, "Comma list (default 0.3,0.1,0.01,0.001,0.0001)");
  a->add_option("--det-points", au.det_points)->capture_default_str();
  a->add_option("--out-dir", au.out_dir)->required();

  DebiasArgs de;
  auto* d = app.add_subcommand("debias", "Train the adversarial projection per fold and export features");
  d->add_option("--embeddings", de.embeddings)->required();
  d->add_option("--folds", de.folds)->required();
  d->add_option("--config", de.config, "Training config JSON");
  d->add_option("--lambda", de.lambda, "Gradient reversal weight");
  d->add_option("--epochs", de.epochs, "Maximum epochs");
  d->add_option("--seed", de.seed);
  d->add_option("--threads", de.threads, "Concurrent fold jobs")->capture_default_str();
  d->add_option("--format", de.format, "csv or binary")->check(CLI::IsMember({"csv", "binary"}));
  d->add_option("--out-dir", de.out_dir)->required();

  ProbeArgs pr;
  auto* q = app.add_subcommand("probe", "Train and evaluate the subgroup probe per fold");
  q->add_option("--embeddings", pr.embeddings, "One feature set for every fold");
  q->add_option("--views", pr.views, "One feature set per fold, in fold order");
  q->add_option("--folds", pr.folds)->required();
  q->add_option("--epochs", pr.epochs);
  q->add_option("--seed", pr.seed)->capture_default_str();
  q->add_flag("--shuffle-labels", pr.shuffle_labels, "Permute subgroup labels across subjects first");
  q->add_flag("--no-early-stop", pr.no_early_stop);
  q->add_option("--out-dir", pr.out_dir)->required();

  ReportArgs re;
  auto* r = app.add_subcommand("report", "Merge audits and probe reports into tables and figures");
  r->add_option("--audit-baseline", re.audit_baseline)->required();
  r->add_option("--audit-debiased", re.audit_debiased)->required();
  r->add_option("--probe-baseline", re.probe_baseline)->required();
  r->add_option("--probe-debiased", re.probe_debiased)->required();
  r->add_option("--out-dir", re.out_dir)->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, std::cerr);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*p) return cmd_pairs(pa);
    if (*a) return cmd_audit(au);
    if (*d) return cmd_debias(de);
    if (*q) return cmd_probe(pr);
    if (*r) return cmd_report(re);
  } catch (const InputError& e) {
    std::cerr << "fairvec: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "fairvec: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "fairvec: numeric failure: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "fairvec: internal error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace fairvec::cli
