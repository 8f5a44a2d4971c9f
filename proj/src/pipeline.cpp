#include "pedattr/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "pedattr/error.hpp"
#include "pedattr/random.hpp"
#include "pedattr/synthetic.hpp"

namespace pedattr {

namespace fs = std::filesystem;

namespace {

template <typename F>
auto in_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::uint64_t hash_mat(const cv::Mat& m, std::uint64_t h) {
  const cv::Mat c = m.isContinuous() ? m : m.clone();
  const auto* p = reinterpret_cast<const char*>(c.data);
  return fnv1a(std::string_view(p, c.total() * c.elemSize()), h);
}

void keep_attributes(Dataset& ds, const std::vector<std::string>& wanted) {
  if (wanted.empty()) return;
  std::vector<std::size_t> idx;
  for (const auto& name : wanted) idx.push_back(ds.registry.index_of(name));
  for (Sample& s : ds.samples) {
    std::vector<Label> labels;
    for (std::size_t a : idx) labels.push_back(s.labels[a]);
    s.labels = std::move(labels);
  }
  ds.registry = make_registry(wanted, ds.samples);
}

}  // namespace

PreparedDataset prepare_dataset(const RunConfig& cfg) {
  return in_stage("ingest", [&] {
    PreparedDataset out;
    if (cfg.manifest.empty()) {
      SynthConfig sc = cfg.synth;
      sc.ratios = cfg.split;
      out.dataset = generate_synthetic(sc);
      out.id = sc.dataset_id();
    } else {
      out.dataset = load_manifest(cfg.manifest);
      std::ifstream in(cfg.manifest, std::ios::binary);
      std::ostringstream bytes;
      bytes << in.rdbuf();
      std::uint64_t h = fnv1a(bytes.str());
      for (const Sample& s : out.dataset.samples) {
        h = hash_mat(s.image, h);
        if (s.mask) h = hash_mat(*s.mask, h);
      }
      out.id = cfg.manifest.stem().string() + "-" + hex64(h);
    }
    keep_attributes(out.dataset, cfg.attributes);
    const bool any_missing =
        std::any_of(out.dataset.samples.begin(), out.dataset.samples.end(),
                    [](const Sample& s) { return !s.split.has_value(); });
    if (any_missing) {
      out.dataset.samples =
          split_partition(std::move(out.dataset.samples), cfg.split, derive_seed(cfg.seed, 3));
    }
    recount(out.dataset.registry, out.dataset.samples);
    return out;
  });
}

FilterBankConfig filter_bank_for(const RunConfig& cfg) {
  return cfg.filter_bank.empty() ? default_filter_bank() : load_filter_bank(cfg.filter_bank);
}

FeatureConfig feature_config_for(const RunConfig& cfg, Scheme scheme) {
  FeatureConfig f;
  f.height = cfg.height;
  f.width = cfg.width;
  f.strips = cfg.strips;
  f.bins = cfg.bins;
  f.scheme = scheme;
  return f;
}

ForestConfig forest_config_for(const RunConfig& cfg) {
  ForestConfig f;
  f.trees = cfg.trees;
  f.max_depth = cfg.forest_depth;
  f.min_leaf = cfg.forest_min_leaf;
  f.samples_per_tree = cfg.forest_samples;
  return f;
}

fs::path resolve_cache_dir(const RunConfig& cfg) {
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  if (const char* env = std::getenv("PEDATTR_CACHE_DIR"); env && *env) return env;
  return {};
}

namespace {

std::string feature_key(const std::string& dataset_id, const FilterBankConfig& bank,
                        const FeatureConfig& f) {
  std::string key = dataset_id + "|" + std::string(to_string(f.scheme)) + "|" +
                    std::to_string(f.height) + "x" + std::to_string(f.width) + "|" +
                    std::to_string(f.strips) + "|" + std::to_string(f.bins);
  char buf[32];
  auto put = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    key.append(buf, res.ptr);
    key += ',';
  };
  for (const auto& g : bank.gabor) {
    put(g.orientation);
    put(g.wavelength);
    put(g.aspect);
    put(g.bandwidth);
  }
  for (const auto& s : bank.schmid) {
    put(s.sigma);
    put(s.tau);
  }
  return hex64(fnv1a(key));
}

}  // namespace

std::vector<FeatureVector> dataset_features(const Dataset& dataset, const std::string& dataset_id,
                                            const FilterBankConfig& bank,
                                            const FeatureConfig& fcfg, const fs::path& cache_dir) {
  std::vector<std::string> ids;
  for (const Sample& s : dataset.samples) ids.push_back(s.id);
  fs::path cached;
  if (!cache_dir.empty()) {
    cached = cache_dir / ("features-" + feature_key(dataset_id, bank, fcfg) + ".tsv");
    if (fs::exists(cached)) {
      FeatureFile file = read_feature_file(cached);
      if (file.ids == ids) return std::move(file.features);
    }
  }
  std::vector<FeatureVector> feats;
  feats.reserve(dataset.samples.size());
  for (const Sample& s : dataset.samples) feats.push_back(extract_features(s, bank, fcfg));
  if (!cached.empty()) {
    fs::create_directories(cache_dir);
    // write then rename so a concurrent reader never sees half a file
    const fs::path tmp = cached.string() + ".tmp";
    write_feature_file(tmp, ids, feats);
    fs::rename(tmp, cached);
  }
  return feats;
}

namespace {

double sign_accuracy(const UnaryModel& m, const std::vector<const FeatureVector*>& feats,
                     const std::vector<int>& labels) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    hit += (m.decision(feats[i]->values) >= 0 ? 1 : 0) == labels[i];
  }
  return feats.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(feats.size());
}

}  // namespace

UnaryModel train_attribute_model(const Dataset& dataset, std::size_t attr,
                                 const std::vector<FeatureVector>& features,
                                 const FilterBankConfig& bank, const FeatureConfig& fcfg,
                                 const UnaryOptions& opts, std::uint64_t seed) {
  if (features.size() != dataset.samples.size()) {
    throw Error("feature count does not match the dataset");
  }
  const std::string& name = dataset.registry.names.at(attr);
  std::vector<FeatureVector> train;
  std::vector<int> labels;
  std::vector<Sample> positives;
  std::size_t negatives = 0;
  std::vector<const FeatureVector*> verify;
  std::vector<int> verify_labels;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const Sample& s = dataset.samples[i];
    const Label l = s.labels[attr];
    if (l == Label::Unknown) continue;
    if (s.split == Split::Train) {
      train.push_back(features[i]);
      labels.push_back(l == Label::Positive ? 1 : 0);
      if (l == Label::Positive) positives.push_back(s);
      else ++negatives;
    } else if (s.split == Split::Verify) {
      verify.push_back(&features[i]);
      verify_labels.push_back(l == Label::Positive ? 1 : 0);
    }
  }
  if (positives.empty() || negatives == 0) {
    throw Error("attribute '" + name + "' needs both classes in the training split");
  }
  if (opts.augment && positives.size() < negatives) {
    const auto extra = augment_positives(positives, negatives, opts.jitter,
                                         derive_seed(seed, 0xa06 + attr));
    for (std::size_t j = positives.size(); j < extra.size(); ++j) {
      train.push_back(extract_features(extra[j], bank, fcfg));
      labels.push_back(1);
    }
  }

  TrainConfig tc = opts.train;
  tc.seed = derive_seed(seed, attr);
  if (opts.tune_C && !verify.empty()) {
    double best_acc = -1;
    double best_C = tc.C;
    for (double c : opts.C_grid) {
      TrainConfig trial = tc;
      trial.C = c;
      const UnaryModel m = train_iksvm(train, labels, trial, name);
      const double acc = sign_accuracy(m, verify, verify_labels);
      if (acc > best_acc) {
        best_acc = acc;
        best_C = c;
      }
    }
    tc.C = best_C;
  }
  UnaryModel model = train_iksvm(train, labels, tc, name);

  const bool verify_both = std::count(verify_labels.begin(), verify_labels.end(), 1) > 0 &&
                           std::count(verify_labels.begin(), verify_labels.end(), 0) > 0;
  if (verify_both) {
    std::vector<double> scores;
    for (const FeatureVector* f : verify) scores.push_back(model.decision(f->values));
    const PlattParams p = fit_platt(scores, verify_labels);
    model.calib_A = p.A;
    model.calib_B = p.B;
  }
  return model;
}

std::vector<double> attribute_probabilities(const UnaryModel& model,
                                            const std::vector<FeatureVector>& features) {
  std::vector<double> p(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) p[i] = predict_proba(model, features[i]);
  return p;
}

RegimeData make_regime_data(const Dataset& dataset, const std::vector<FeatureVector>& features,
                            std::vector<std::vector<double>> prob) {
  RegimeData d;
  d.features = &features;
  d.attributes = dataset.registry.names;
  d.prob = std::move(prob);
  d.truth.assign(d.attributes.size(), {});
  for (const Sample& s : dataset.samples) {
    if (!s.split) throw Error("sample '" + s.id + "' has no split");
    d.ids.push_back(s.id);
    d.splits.push_back(*s.split);
    for (std::size_t a = 0; a < d.attributes.size(); ++a) d.truth[a].push_back(s.labels[a]);
  }
  return d;
}

std::vector<Accuracy> score_regime(const RegimeData& data, const RegimeResult& result) {
  std::vector<Accuracy> out;
  for (std::size_t a = 0; a < data.attributes.size(); ++a) {
    std::map<std::string, int> pred, truth;
    for (std::size_t t = 0; t < result.targets.size(); ++t) {
      const std::size_t node = result.targets[t];
      const Label l = data.truth[a][node];
      if (l == Label::Unknown) continue;
      truth[data.ids[node]] = l == Label::Positive ? 1 : 0;
      pred[data.ids[node]] = result.labels[a][t];
    }
    try {
      out.push_back(evaluate(pred, truth));
    } catch (const Error& e) {
      throw Error("attribute '" + data.attributes[a] + "': " + e.what());
    }
  }
  return out;
}

std::vector<double> sigma_candidates(const std::vector<FeatureVector>& features) {
  const std::size_t n = features.size();
  if (n < 2) throw Error("sigma tuning needs at least 2 samples");
  const std::size_t m = std::min<std::size_t>(n, 200);
  std::vector<std::size_t> pick(m);
  for (std::size_t i = 0; i < m; ++i) pick[i] = i * n / m;
  std::vector<double> d;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      d.push_back(std::sqrt(squared_distance(features[pick[i]].values, features[pick[j]].values)));
    }
  }
  std::sort(d.begin(), d.end());
  std::vector<double> out;
  for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const double v = d[static_cast<std::size_t>(q * static_cast<double>(d.size() - 1))];
    if (v > 0 && (out.empty() || v > out.back())) out.push_back(v);
  }
  if (out.empty()) out.push_back(1.0);
  return out;
}

double tune_sigma(Regime regime, const RegimeData& data, std::size_t k, double lambda) {
  if (data.features == nullptr) throw Error("sigma tuning needs features");
  const auto candidates = sigma_candidates(*data.features);
  const bool has_verify =
      std::find(data.splits.begin(), data.splits.end(), Split::Verify) != data.splits.end();
  const double fallback = candidates[candidates.size() / 2];
  if (!has_verify) return fallback;
  double best = fallback, best_acc = -1;
  for (double sigma : candidates) {
    RegimeConfig rc;
    rc.k = k;
    rc.lambda = lambda;
    rc.gaussian.sigma = sigma;
    rc.target = Split::Verify;
    const RegimeResult r = run_regime(regime, data, rc);
    double acc = 0;
    for (const Accuracy& a : score_regime(data, r)) acc += a.accuracy;
    if (acc > best_acc) {
      best_acc = acc;
      best = sigma;
    }
  }
  return best;
}

EvalReport run_pipeline(const RunConfig& cfg, const Progress& progress) {
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  in_stage("config", [&] { cfg.validate(); });
  const PreparedDataset prepared = prepare_dataset(cfg);
  const Dataset& ds = prepared.dataset;
  const FilterBankConfig bank = in_stage("extract", [&] { return filter_bank_for(cfg); });
  const fs::path cache = resolve_cache_dir(cfg);
  const auto regimes = cfg.active_regimes();

  EvalReport report;
  report.attributes = ds.registry.names;
  report.seed = cfg.seed;
  report.config_hash = config_hash(cfg);
  report.dataset_id = prepared.id;

  // columns are regime-major so each regime's schemes sit side by side
  std::map<std::pair<Regime, Scheme>, std::vector<Accuracy>> cells;
  for (Scheme scheme : cfg.schemes) {
    const std::string sname(to_string(scheme));
    const FeatureConfig fcfg = feature_config_for(cfg, scheme);
    say("extract " + sname);
    const auto features = in_stage("extract", [&] {
      return dataset_features(ds, prepared.id, bank, fcfg, cache);
    });

    std::vector<std::vector<double>> prob(ds.registry.size());
    in_stage("train", [&] {
      UnaryOptions opts;
      opts.train.C = cfg.C;
      opts.train.max_passes = cfg.max_passes;
      opts.augment = cfg.augment;
      opts.tune_C = cfg.tune_C;
      for (std::size_t a = 0; a < ds.registry.size(); ++a) {
        say("train " + sname + " " + ds.registry.names[a]);
        const UnaryModel m = train_attribute_model(ds, a, features, bank, fcfg, opts,
                                                   derive_seed(cfg.seed, 10));
        prob[a] = attribute_probabilities(m, features);
      }
    });
    const RegimeData data = make_regime_data(ds, features, std::move(prob));

    std::optional<ForestModel> forest;
    const bool need_forest = std::any_of(regimes.begin(), regimes.end(), uses_forest);
    if (need_forest) {
      say("forest " + sname);
      forest = in_stage("forest", [&] {
        return train_unsupervised_forest(features, forest_config_for(cfg),
                                         derive_seed(cfg.seed, 20));
      });
    }

    for (Regime regime : regimes) {
      const std::string rname(to_string(regime));
      say("infer " + rname + " " + sname);
      const RegimeResult result = in_stage("infer", [&] {
        RegimeConfig rc;
        rc.k = cfg.k;
        rc.lambda = cfg.lambda;
        rc.forest = forest ? &*forest : nullptr;
        if (regime == Regime::MrfG1 || regime == Regime::MrfG2) {
          rc.gaussian.sigma =
              cfg.sigma > 0 ? cfg.sigma : tune_sigma(regime, data, cfg.k, cfg.lambda);
        }
        return run_regime(regime, data, rc);
      });
      cells[{regime, scheme}] = in_stage("evaluate", [&] { return score_regime(data, result); });
    }
  }
  in_stage("evaluate", [&] {
    for (Regime regime : regimes) {
      for (Scheme scheme : cfg.schemes) {
        report.add_column(std::string(to_string(regime)) + "/" + std::string(to_string(scheme)),
                          cells.at({regime, scheme}));
      }
    }
  });
  return report;
}

void write_predictions(const fs::path& path, const Predictions& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write predictions " + path.string());
  out << "id";
  for (const auto& a : p.attributes) out << '\t' << a;
  out << '\n';
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    out << p.ids[i];
    for (std::uint8_t l : p.labels[i]) out << '\t' << int(l);
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

Predictions read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions " + path.string());
  Predictions p;
  std::string line;
  if (!std::getline(in, line)) throw Error("predictions file is empty: " + path.string());
  {
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, '\t');
    if (cell != "id") throw Error("predictions header must start with 'id'");
    while (std::getline(ss, cell, '\t')) p.attributes.push_back(cell);
  }
  for (std::size_t no = 2; std::getline(in, line); ++no) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, '\t');
    p.ids.push_back(cell);
    std::vector<std::uint8_t> row;
    while (std::getline(ss, cell, '\t')) {
      if (cell != "0" && cell != "1") {
        throw Error(path.string() + ":" + std::to_string(no) + ": label must be 0 or 1");
      }
      row.push_back(cell == "1");
    }
    if (row.size() != p.attributes.size()) {
      throw Error(path.string() + ":" + std::to_string(no) + ": wrong number of columns");
    }
    p.labels.push_back(std::move(row));
  }
  return p;
}

}  // namespace pedattr
