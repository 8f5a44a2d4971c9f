// pedattr: command-line front end for the attribute recognition pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "pedattr/config.hpp"
#include "pedattr/error.hpp"
#include "pedattr/pipeline.hpp"
#include "pedattr/random.hpp"
#include "pedattr/synthetic.hpp"

namespace fs = std::filesystem;
using namespace pedattr;

namespace {

struct Settings {
  std::string config_file;
  ConfigMap overrides;

  RunConfig build(const ConfigMap& defaults = {}) const {
    ConfigMap merged = defaults;
    if (!config_file.empty()) {
      for (auto& [k, v] : read_config_file(config_file)) merged[k] = v;
    }
    for (const auto& [k, v] : overrides) merged[k] = v;
    RunConfig cfg;
    apply_config(merged, cfg);
    return cfg;
  }
};

void flag(CLI::App* app, const std::string& name, const std::string& key, Settings& s,
          const std::string& help) {
  app->add_option_function<std::string>(
      name, [&s, key](const std::string& v) { s.overrides[key] = v; }, help);
}

void common_flags(CLI::App* app, Settings& s) {
  app->add_option("--config", s.config_file, "key = value config file")->check(CLI::ExistingFile);
  flag(app, "--manifest", "manifest", s, "dataset manifest (TSV)");
  flag(app, "--scheme", "scheme", s, "whole|fore|fore-back|fore-whole (comma list for pipeline)");
  flag(app, "--filter-bank", "filter_bank", s, "texture filter bank file");
  app->add_option_function<std::vector<std::string>>(
      "--attr",
      [&s](const std::vector<std::string>& v) {
        std::string joined;
        for (const auto& a : v) joined += (joined.empty() ? "" : ",") + a;
        s.overrides["attr"] = joined;
      },
      "attribute name (repeatable)");
  flag(app, "--seed", "seed", s, "master seed");
}

void unary_flags(CLI::App* app, Settings& s) {
  flag(app, "--C", "C", s, "SVM box constraint");
  flag(app, "--tune-C", "tune_C", s, "grid-search C on the verify split (0/1)");
  flag(app, "--augment", "augment", s, "jitter minority positives (0/1)");
}

void graph_flags(CLI::App* app, Settings& s) {
  flag(app, "--regime", "regime", s, "iksvm|mrfg1|mrfg2|mrfr1|mrfr2");
  flag(app, "--pairwise", "pairwise", s, "gauss|forest");
  flag(app, "--k", "k", s, "neighbours per node");
  flag(app, "--lambda", "lambda", s, "pairwise weight");
  flag(app, "--sigma", "sigma", s, "Gaussian bandwidth (<= 0 tunes on verify)");
  flag(app, "--trees", "trees", s, "forest size");
}

void require_manifest(const RunConfig& cfg) {
  if (cfg.manifest.empty()) throw Error("--manifest is required");
}

std::vector<FeatureVector> load_or_extract(const RunConfig& cfg, const PreparedDataset& p,
                                           const std::string& features_file) {
  if (!features_file.empty()) {
    FeatureFile f = read_feature_file(features_file);
    std::vector<std::string> ids;
    for (const Sample& s : p.dataset.samples) ids.push_back(s.id);
    if (f.ids != ids) throw Error("feature file ids do not match the manifest order");
    return std::move(f.features);
  }
  return dataset_features(p.dataset, p.id, filter_bank_for(cfg),
                          feature_config_for(cfg, cfg.schemes.front()), resolve_cache_dir(cfg));
}

template <typename F>
void stage(const std::string& name, F&& fn) {
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pedestrian attribute recognition with MRF refinement"};
  app.require_subcommand(1);

  Settings s;

  // synth
  auto* synth = app.add_subcommand("synth", "render a synthetic dataset");
  SynthConfig sc;
  std::string synth_out;
  synth->add_option("--n", sc.n, "number of samples");
  synth->add_option("--attrs", sc.attrs, "number of attributes (1-6)");
  synth->add_option("--noise", sc.noise, "probability of a flipped cue");
  synth->add_option("--seed", sc.seed, "seed");
  synth->add_option("--cluster", sc.cluster_size, "samples per identity");
  synth->add_option("--out", synth_out, "output directory")->required();

  // extract
  auto* extract = app.add_subcommand("extract", "compute features for a manifest");
  std::string out_path;
  common_flags(extract, s);
  extract->add_option("--out", out_path, "feature file")->required();

  // train-unary
  auto* train = app.add_subcommand("train-unary", "train calibrated ikSVM unaries");
  std::string features_file;
  common_flags(train, s);
  unary_flags(train, s);
  train->add_option("--features", features_file, "feature file from `extract`");
  train->add_option("--out", out_path, "model directory")->required();

  // train-forest
  auto* forest = app.add_subcommand("train-forest", "train the unsupervised forest");
  common_flags(forest, s);
  flag(forest, "--trees", "trees", s, "forest size");
  forest->add_option("--features", features_file, "feature file from `extract`");
  forest->add_option("--out", out_path, "forest file")->required();

  // infer
  auto* infer = app.add_subcommand("infer", "run one regime and write test predictions");
  std::string models_dir, forest_file, dump_file;
  common_flags(infer, s);
  graph_flags(infer, s);
  infer->add_option("--features", features_file, "feature file from `extract`");
  infer->add_option("--models", models_dir, "directory of <attr>.model files")->required();
  infer->add_option("--forest", forest_file, "forest file (forest regimes)");
  infer->add_option("--graph-dump", dump_file, "write the k-NN graph here");
  infer->add_option("--out", out_path, "predictions file")->required();

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against the manifest");
  std::string predictions_file, column;
  common_flags(evaluate_cmd, s);
  evaluate_cmd->add_option("--predictions", predictions_file, "predictions file")->required();
  evaluate_cmd->add_option("--column", column, "report column name");
  evaluate_cmd->add_option("--out", out_path, "report directory")->required();

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "extract, train, infer and evaluate");
  bool quiet = false;
  common_flags(pipe, s);
  unary_flags(pipe, s);
  graph_flags(pipe, s);
  flag(pipe, "--out", "out", s, "report directory");
  flag(pipe, "--synth-n", "synth.n", s, "synthetic sample count (no manifest)");
  flag(pipe, "--synth-attrs", "synth.attrs", s, "synthetic attribute count");
  flag(pipe, "--synth-noise", "synth.noise", s, "synthetic cue noise");
  flag(pipe, "--synth-seed", "synth.seed", s, "synthetic seed");
  pipe->add_flag("--quiet", quiet, "no progress on stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      stage("synth", [&] {
        Dataset ds = generate_synthetic(sc);
        const fs::path manifest = save_dataset(synth_out, ds.registry, ds.samples);
        std::cout << manifest.string() << '\n';
      });
    } else if (extract->parsed()) {
      const RunConfig cfg = s.build();
      require_manifest(cfg);
      const PreparedDataset p = prepare_dataset(cfg);
      stage("extract", [&] {
        const auto feats = load_or_extract(cfg, p, {});
        std::vector<std::string> ids;
        for (const Sample& smp : p.dataset.samples) ids.push_back(smp.id);
        write_feature_file(out_path, ids, feats);
      });
    } else if (train->parsed()) {
      const RunConfig cfg = s.build();
      require_manifest(cfg);
      const PreparedDataset p = prepare_dataset(cfg);
      std::vector<FeatureVector> feats;
      stage("extract", [&] { feats = load_or_extract(cfg, p, features_file); });
      stage("train", [&] {
        UnaryOptions opts;
        opts.train.C = cfg.C;
        opts.train.max_passes = cfg.max_passes;
        opts.augment = cfg.augment;
        opts.tune_C = cfg.tune_C;
        FeatureConfig fcfg = feature_config_for(cfg, feats.front().scheme);
        const FilterBankConfig bank = filter_bank_for(cfg);
        fs::create_directories(out_path);
        for (std::size_t a = 0; a < p.dataset.registry.size(); ++a) {
          const UnaryModel m = train_attribute_model(p.dataset, a, feats, bank, fcfg, opts,
                                                     derive_seed(cfg.seed, 10));
          save_unary_model(fs::path(out_path) / (p.dataset.registry.names[a] + ".model"), m);
        }
      });
    } else if (forest->parsed()) {
      const RunConfig cfg = s.build();
      require_manifest(cfg);
      const PreparedDataset p = prepare_dataset(cfg);
      std::vector<FeatureVector> feats;
      stage("extract", [&] { feats = load_or_extract(cfg, p, features_file); });
      stage("forest", [&] {
        const ForestModel m = train_unsupervised_forest(feats, forest_config_for(cfg),
                                                        derive_seed(cfg.seed, 20));
        save_forest(out_path, m);
      });
    } else if (infer->parsed()) {
      const RunConfig cfg = s.build({{"regime", "mrfr2"}});
      require_manifest(cfg);
      const auto regimes = cfg.active_regimes();
      if (regimes.size() != 1) throw StageError("infer", "infer runs exactly one regime");
      const Regime regime = regimes.front();
      const PreparedDataset p = prepare_dataset(cfg);
      std::vector<FeatureVector> feats;
      stage("extract", [&] { feats = load_or_extract(cfg, p, features_file); });
      stage("infer", [&] {
        std::vector<std::vector<double>> prob(p.dataset.registry.size());
        for (std::size_t a = 0; a < prob.size(); ++a) {
          const fs::path mp = fs::path(models_dir) / (p.dataset.registry.names[a] + ".model");
          if (!fs::exists(mp)) continue;  // reported as missing by run_regime
          const UnaryModel m = load_unary_model(mp);
          if (m.dim != feats.front().dim()) {
            throw Error("model " + mp.string() + " expects dim " + std::to_string(m.dim) +
                        ", features have " + std::to_string(feats.front().dim()));
          }
          prob[a] = attribute_probabilities(m, feats);
        }
        const RegimeData data = make_regime_data(p.dataset, feats, std::move(prob));
        ForestModel fm;
        RegimeConfig rc;
        rc.k = cfg.k;
        rc.lambda = cfg.lambda;
        if (uses_forest(regime)) {
          if (forest_file.empty()) throw Error("--forest is required for " + std::string(to_string(regime)));
          fm = load_forest(forest_file);
          rc.forest = &fm;
        } else if (regime != Regime::IkSvm) {
          rc.gaussian.sigma = cfg.sigma > 0 ? cfg.sigma : tune_sigma(regime, data, cfg.k, cfg.lambda);
        }
        const RegimeResult r = run_regime(regime, data, rc);
        if (!dump_file.empty() && regime != Regime::IkSvm) write_graph_dump(dump_file, r.graph);
        Predictions out;
        out.attributes = data.attributes;
        for (std::size_t t = 0; t < r.targets.size(); ++t) {
          out.ids.push_back(data.ids[r.targets[t]]);
          std::vector<std::uint8_t> row;
          for (std::size_t a = 0; a < data.attributes.size(); ++a) row.push_back(r.labels[a][t]);
          out.labels.push_back(std::move(row));
        }
        write_predictions(out_path, out);
      });
    } else if (evaluate_cmd->parsed()) {
      const RunConfig cfg = s.build();
      require_manifest(cfg);
      const PreparedDataset p = prepare_dataset(cfg);
      stage("evaluate", [&] {
        const Predictions pred = read_predictions(predictions_file);
        const auto& names = p.dataset.registry.names;
        std::map<std::string, std::size_t> row_of;
        for (std::size_t i = 0; i < pred.ids.size(); ++i) row_of[pred.ids[i]] = i;
        EvalReport report;
        report.attributes = names;
        report.seed = cfg.seed;
        report.config_hash = config_hash(cfg);
        report.dataset_id = p.id;
        std::vector<Accuracy> accs;
        for (std::size_t a = 0; a < names.size(); ++a) {
          const auto col = std::find(pred.attributes.begin(), pred.attributes.end(), names[a]);
          if (col == pred.attributes.end()) throw Error("predictions lack attribute '" + names[a] + "'");
          const auto c = static_cast<std::size_t>(col - pred.attributes.begin());
          std::map<std::string, int> truth, guess;
          for (const Sample& smp : p.dataset.samples) {
            if (smp.split != Split::Test || smp.labels[a] == Label::Unknown) continue;
            truth[smp.id] = smp.labels[a] == Label::Positive;
            auto it = row_of.find(smp.id);
            if (it != row_of.end()) guess[smp.id] = pred.labels[it->second][c];
          }
          accs.push_back(evaluate(guess, truth));
        }
        report.add_column(column.empty() ? fs::path(predictions_file).stem().string() : column, accs);
        write_report(out_path, report);
        std::cout << format_text(report);
      });
    } else if (pipe->parsed()) {
      const RunConfig cfg = s.build();
      const EvalReport report = run_pipeline(cfg, [&](const std::string& msg) {
        if (!quiet) std::cerr << "pedattr: " << msg << '\n';
      });
      stage("report", [&] { write_report(cfg.out, report); });
      std::cout << format_text(report);
    }
  } catch (const StageError& e) {
    std::cerr << "pedattr: error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pedattr: error: [config] " << e.what() << '\n';
    return 1;
  }
  return 0;
}
