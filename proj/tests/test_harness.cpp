#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "pedattr/config.hpp"
#include "pedattr/error.hpp"
#include "pedattr/pipeline.hpp"
#include "pedattr/report.hpp"
#include "pedattr/synthetic.hpp"

using namespace pedattr;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_run() {
  RunConfig cfg;
  cfg.synth.n = 160;
  cfg.synth.attrs = 2;
  cfg.synth.noise = 0.1;
  cfg.trees = 10;
  cfg.k = 3;
  return cfg;
}

}  // namespace

TEST(Evaluate, PerfectAndHalf) {
  const std::map<std::string, int> truth{{"a", 1}, {"b", 0}, {"c", 1}, {"d", 0}};
  const Accuracy perfect = evaluate(truth, truth);
  EXPECT_DOUBLE_EQ(perfect.accuracy, 100.0);
  EXPECT_DOUBLE_EQ(perfect.balanced, 100.0);
  EXPECT_EQ(perfect.total, 4u);
  const std::map<std::string, int> half{{"a", 1}, {"b", 1}, {"c", 0}, {"d", 0}};
  EXPECT_DOUBLE_EQ(evaluate(half, truth).accuracy, 50.0);
  const std::map<std::string, int> ones{{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}};
  EXPECT_DOUBLE_EQ(evaluate(ones, truth).accuracy, 50.0);
  EXPECT_DOUBLE_EQ(evaluate(ones, truth).balanced, 50.0);
}

TEST(Evaluate, RejectsMismatchedIds) {
  const std::map<std::string, int> truth{{"a", 1}, {"b", 0}};
  EXPECT_THROW(evaluate({{"a", 1}}, truth), Error);
  EXPECT_THROW(evaluate({{"a", 1}, {"x", 0}}, truth), Error);
  EXPECT_THROW(evaluate({{"a", 1}, {"b", 2}}, truth), Error);
  EXPECT_THROW(evaluate({}, {}), Error);
}

TEST(Report, AverageRowAndCsvRoundTrip) {
  oracle::TempDir dir("report");
  EvalReport r;
  r.attributes = {"hat", "bag"};
  r.seed = 3;
  r.config_hash = "abc";
  r.dataset_id = "toy";
  r.add_column("iksvm/fore-whole", {{80.0, 75.0, 10}, {60.0, 55.0, 10}});
  r.add_column("mrfr2/fore-whole", {{90.0, 85.0, 10}, {70.0, 65.0, 10}});
  const auto avg = r.average();
  ASSERT_EQ(avg.size(), 2u);
  EXPECT_DOUBLE_EQ(avg[0], 70.0);
  EXPECT_DOUBLE_EQ(avg[1], 80.0);
  EXPECT_DOUBLE_EQ(r.average(true)[0], 65.0);

  const std::string text = format_text(r);
  EXPECT_NE(text.find("AVERAGE"), std::string::npos);
  EXPECT_NE(text.find("80.00"), std::string::npos);
  EXPECT_NE(text.find("# seed 3"), std::string::npos);

  write_report(dir.path(), r);
  EXPECT_EQ(slurp(dir.path() / "report.txt"), text);
  const EvalReport back = read_report_csv(dir.path() / "report.csv");
  EXPECT_EQ(back.attributes, r.attributes);
  EXPECT_EQ(back.columns, r.columns);
  EXPECT_EQ(back.accuracy, r.accuracy);
}

TEST(Hashing, FnvKnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xffULL), "00000000000000ff");
}

TEST(Synthetic, DeterministicPerSeed) {
  SynthConfig cfg;
  cfg.n = 40;
  const Dataset a = generate_synthetic(cfg);
  const Dataset b = generate_synthetic(cfg);
  cfg.seed = 2;
  const Dataset c = generate_synthetic(cfg);
  ASSERT_EQ(a.samples.size(), 40u);
  bool differs = false;
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(a.samples[i].id, b.samples[i].id);
    EXPECT_EQ(a.samples[i].labels, b.samples[i].labels);
    EXPECT_EQ(a.samples[i].split, b.samples[i].split);
    EXPECT_EQ(cv::norm(a.samples[i].image, b.samples[i].image, cv::NORM_INF), 0.0);
    differs |= cv::norm(a.samples[i].image, c.samples[i].image, cv::NORM_INF) > 0;
  }
  EXPECT_TRUE(differs);
}

TEST(Synthetic, CuesMatchLabelsWithoutNoise) {
  SynthConfig cfg;
  cfg.n = 200;
  cfg.attrs = 6;
  std::vector<SynthRender> renders;
  const Dataset ds = generate_synthetic(cfg, &renders);
  ASSERT_EQ(ds.registry.size(), 6u);
  EXPECT_EQ(ds.registry.names[0], "upperRed");
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    ASSERT_TRUE(s.mask.has_value());
    EXPECT_EQ(s.image.rows, 128);
    EXPECT_EQ(s.image.cols, 48);
    for (std::size_t a = 0; a < 6; ++a) {
      EXPECT_EQ(renders[i].cue[a], s.labels[a] == Label::Positive) << s.id << " " << a;
    }
  }
}

TEST(Synthetic, NoiseFlipsSomeCues) {
  SynthConfig cfg;
  cfg.n = 400;
  cfg.noise = 0.3;
  std::vector<SynthRender> renders;
  const Dataset ds = generate_synthetic(cfg, &renders);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    for (std::size_t a = 0; a < cfg.attrs; ++a) {
      flipped += renders[i].cue[a] != (ds.samples[i].labels[a] == Label::Positive);
    }
  }
  // every (sample, attribute) cue flips independently: expect about 0.3 * 1600
  EXPECT_GT(flipped, 400u);
  EXPECT_LT(flipped, 560u);
}

TEST(Synthetic, IdentitiesStayInOneSplit) {
  SynthConfig cfg;
  cfg.n = 300;
  const Dataset ds = generate_synthetic(cfg);
  const std::size_t identities = cfg.n / cfg.cluster_size;
  for (std::size_t i = identities; i < ds.samples.size(); ++i) {
    EXPECT_EQ(ds.samples[i].split, ds.samples[i % identities].split);
    EXPECT_EQ(ds.samples[i].labels, ds.samples[i % identities].labels);
  }
}

TEST(Synthetic, RejectsBadParameters) {
  SynthConfig cfg;
  cfg.attrs = 7;
  EXPECT_THROW(generate_synthetic(cfg), Error);
  cfg.attrs = 2;
  cfg.noise = 1.0;
  EXPECT_THROW(generate_synthetic(cfg), Error);
  cfg.noise = 0.0;
  cfg.n = 2;
  EXPECT_THROW(generate_synthetic(cfg), Error);
}

TEST(Config, FileAndOverrides) {
  oracle::TempDir dir("config");
  const auto path = dir.path() / "run.cfg";
  std::ofstream(path) << "# comment\nsynth.n = 300\nregime = iksvm, mrfr2\nlambda=0.5 # half\n"
                         "scheme = fore-back\n";
  RunConfig cfg;
  apply_config(read_config_file(path), cfg);
  EXPECT_EQ(cfg.synth.n, 300u);
  EXPECT_EQ(cfg.regimes, (std::vector<Regime>{Regime::IkSvm, Regime::MrfR2}));
  EXPECT_DOUBLE_EQ(cfg.lambda, 0.5);
  EXPECT_EQ(cfg.schemes, (std::vector<Scheme>{Scheme::ForeBack}));
  apply_config({{"lambda", "2"}}, cfg);
  EXPECT_DOUBLE_EQ(cfg.lambda, 2.0);

  EXPECT_THROW(apply_config({{"lamda", "2"}}, cfg), Error);
  EXPECT_THROW(apply_config({{"k", "five"}}, cfg), Error);
  EXPECT_THROW(apply_config({{"pairwise", "cosine"}}, cfg), Error);
  std::ofstream(path) << "lambda 3\n";
  EXPECT_THROW(read_config_file(path), Error);
}

TEST(Config, HashIgnoresOutputPaths) {
  RunConfig a;
  RunConfig b = a;
  b.out = "elsewhere";
  b.cache_dir = "/tmp/x";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.lambda = 0.25;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, PairwiseFilterAndValidation) {
  RunConfig cfg;
  cfg.pairwise = "forest";
  EXPECT_EQ(cfg.active_regimes(),
            (std::vector<Regime>{Regime::IkSvm, Regime::MrfR1, Regime::MrfR2}));
  cfg.C = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Pipeline, ReportsAreByteIdenticalAndCacheTransparent) {
  oracle::TempDir cache("cache");
  RunConfig cfg = small_run();
  const EvalReport fresh = run_pipeline(cfg);
  ASSERT_EQ(fresh.columns.size(), 5u);
  EXPECT_EQ(fresh.columns[0], "iksvm/fore-whole");
  EXPECT_EQ(fresh.attributes.size(), 2u);

  cfg.cache_dir = cache.path();
  const EvalReport first = run_pipeline(cfg);
  const EvalReport cached = run_pipeline(cfg);
  EXPECT_EQ(format_text(fresh), format_text(first));
  EXPECT_EQ(format_text(first), format_text(cached));
  EXPECT_EQ(format_csv(first, true), format_csv(cached, true));
  bool has_file = false;
  for (const auto& e : std::filesystem::directory_iterator(cache.path())) {
    has_file |= e.path().filename().string().rfind("features-", 0) == 0;
  }
  EXPECT_TRUE(has_file);
}

TEST(Pipeline, ManifestInputMatchesInMemoryData) {
  oracle::TempDir dir("pipeline-manifest");
  RunConfig cfg = small_run();
  cfg.regimes = {Regime::IkSvm, Regime::MrfG1};
  Dataset ds = generate_synthetic(cfg.synth);
  const auto manifest = save_dataset(dir.path(), ds.registry, ds.samples);
  const EvalReport synth = run_pipeline(cfg);
  cfg.manifest = manifest;
  const EvalReport loaded = run_pipeline(cfg);
  EXPECT_EQ(synth.accuracy, loaded.accuracy);
  EXPECT_NE(synth.dataset_id, loaded.dataset_id);
}

TEST(Pipeline, ErrorsCarryTheStage) {
  RunConfig cfg = small_run();
  cfg.manifest = "/nonexistent/manifest.tsv";
  try {
    run_pipeline(cfg);
    FAIL() << "expected an error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  cfg = small_run();
  cfg.attributes = {"wings"};
  try {
    run_pipeline(cfg);
    FAIL() << "expected an error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "ingest");
    EXPECT_NE(std::string(e.what()).find("wings"), std::string::npos);
  }
}

TEST(Pipeline, NoiseFreeUpperRedIsLearned) {
  RunConfig cfg;
  cfg.synth.n = 1000;
  cfg.synth.attrs = 1;
  cfg.regimes = {Regime::IkSvm};
  const EvalReport r = run_pipeline(cfg);
  ASSERT_EQ(r.attributes, (std::vector<std::string>{"upperRed"}));
  EXPECT_GE(r.accuracy[0][0], 95.0);
}

TEST(Predictions, RoundTrip) {
  oracle::TempDir dir("pred");
  Predictions p;
  p.attributes = {"hat", "bag"};
  p.ids = {"x", "y"};
  p.labels = {{1, 0}, {0, 1}};
  write_predictions(dir.path() / "p.tsv", p);
  EXPECT_EQ(slurp(dir.path() / "p.tsv"), "id\that\tbag\nx\t1\t0\ny\t0\t1\n");
  const Predictions back = read_predictions(dir.path() / "p.tsv");
  EXPECT_EQ(back.ids, p.ids);
  EXPECT_EQ(back.labels, p.labels);
}
