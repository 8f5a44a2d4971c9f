#include "pedattr/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "pedattr/error.hpp"
#include "pedattr/report.hpp"

namespace pedattr {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error("config: '" + key + "' expects a boolean, got '" + v + "'");
}

std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& str) {
  std::string out;
  for (const auto& it : items) {
    if (!out.empty()) out += ',';
    out += str(it);
  }
  return out;
}

}  // namespace

ConfigMap read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  ConfigMap map;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(path.string() + ":" + std::to_string(no) + ": expected key = value");
    }
    map[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return map;
}

void apply_config(const ConfigMap& map, RunConfig& cfg) {
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto size = [](std::size_t& dst) {
    return Setter([&dst](const std::string& k, const std::string& v) {
      dst = static_cast<std::size_t>(to_u64(k, v));
    });
  };
  auto integer = [](int& dst) {
    return Setter([&dst](const std::string& k, const std::string& v) {
      dst = static_cast<int>(to_u64(k, v));
    });
  };
  auto real = [](double& dst) {
    return Setter([&dst](const std::string& k, const std::string& v) { dst = to_double(k, v); });
  };
  auto flag = [](bool& dst) {
    return Setter([&dst](const std::string& k, const std::string& v) { dst = to_bool(k, v); });
  };
  auto path = [](fs::path& dst) {
    return Setter([&dst](const std::string&, const std::string& v) { dst = v; });
  };
  const std::map<std::string, Setter> setters = {
      {"manifest", path(cfg.manifest)},
      {"synth.n", size(cfg.synth.n)},
      {"synth.attrs", size(cfg.synth.attrs)},
      {"synth.noise", real(cfg.synth.noise)},
      {"synth.seed", [&](const std::string& k, const std::string& v) { cfg.synth.seed = to_u64(k, v); }},
      {"synth.cluster", size(cfg.synth.cluster_size)},
      {"synth.identity_splits", flag(cfg.synth.identity_splits)},
      {"scheme",
       [&](const std::string&, const std::string& v) {
         cfg.schemes.clear();
         for (const auto& s : split_list(v)) cfg.schemes.push_back(parse_scheme(s));
       }},
      {"regime",
       [&](const std::string&, const std::string& v) {
         cfg.regimes.clear();
         for (const auto& s : split_list(v)) cfg.regimes.push_back(parse_regime(s));
       }},
      {"pairwise",
       [&](const std::string&, const std::string& v) {
         if (!v.empty() && v != "gauss" && v != "forest") {
           throw Error("config: pairwise must be gauss or forest, got '" + v + "'");
         }
         cfg.pairwise = v;
       }},
      {"attr", [&](const std::string&, const std::string& v) { cfg.attributes = split_list(v); }},
      {"height", integer(cfg.height)},
      {"width", integer(cfg.width)},
      {"strips", integer(cfg.strips)},
      {"bins", integer(cfg.bins)},
      {"filter_bank", path(cfg.filter_bank)},
      {"C", real(cfg.C)},
      {"tune_C", flag(cfg.tune_C)},
      {"augment", flag(cfg.augment)},
      {"max_passes", size(cfg.max_passes)},
      {"k", size(cfg.k)},
      {"lambda", real(cfg.lambda)},
      {"sigma", real(cfg.sigma)},
      {"trees", size(cfg.trees)},
      {"forest.depth", size(cfg.forest_depth)},
      {"forest.min_leaf", size(cfg.forest_min_leaf)},
      {"forest.samples", size(cfg.forest_samples)},
      {"split.train", real(cfg.split.train)},
      {"split.verify", real(cfg.split.verify)},
      {"split.test", real(cfg.split.test)},
      {"seed", [&](const std::string& k, const std::string& v) { cfg.seed = to_u64(k, v); }},
      {"out", path(cfg.out)},
      {"cache_dir", path(cfg.cache_dir)},
  };
  for (const auto& [key, value] : map) {
    auto it = setters.find(key);
    if (it == setters.end()) throw Error("config: unknown key '" + key + "'");
    it->second(key, value);
  }
}

ConfigMap config_to_map(const RunConfig& cfg) {
  ConfigMap m;
  if (cfg.manifest.empty()) {
    m["synth.n"] = std::to_string(cfg.synth.n);
    m["synth.attrs"] = std::to_string(cfg.synth.attrs);
    m["synth.noise"] = num(cfg.synth.noise);
    m["synth.seed"] = std::to_string(cfg.synth.seed);
    m["synth.cluster"] = std::to_string(cfg.synth.cluster_size);
    m["synth.identity_splits"] = cfg.synth.identity_splits ? "1" : "0";
  } else {
    m["manifest"] = "(file)";  // content enters through the dataset id
  }
  m["scheme"] = join(cfg.schemes, [](Scheme s) { return std::string(to_string(s)); });
  m["regime"] = join(cfg.regimes, [](Regime r) { return std::string(to_string(r)); });
  m["pairwise"] = cfg.pairwise;
  m["attr"] = join(cfg.attributes, [](const std::string& s) { return s; });
  m["height"] = std::to_string(cfg.height);
  m["width"] = std::to_string(cfg.width);
  m["strips"] = std::to_string(cfg.strips);
  m["bins"] = std::to_string(cfg.bins);
  m["filter_bank"] = cfg.filter_bank.empty() ? "" : "(file)";
  m["C"] = num(cfg.C);
  m["tune_C"] = cfg.tune_C ? "1" : "0";
  m["augment"] = cfg.augment ? "1" : "0";
  m["max_passes"] = std::to_string(cfg.max_passes);
  m["k"] = std::to_string(cfg.k);
  m["lambda"] = num(cfg.lambda);
  m["sigma"] = num(cfg.sigma);
  m["trees"] = std::to_string(cfg.trees);
  m["forest.depth"] = std::to_string(cfg.forest_depth);
  m["forest.min_leaf"] = std::to_string(cfg.forest_min_leaf);
  m["forest.samples"] = std::to_string(cfg.forest_samples);
  m["split.train"] = num(cfg.split.train);
  m["split.verify"] = num(cfg.split.verify);
  m["split.test"] = num(cfg.split.test);
  m["seed"] = std::to_string(cfg.seed);
  return m;
}

std::string config_hash(const RunConfig& cfg) {
  std::string canon;
  for (const auto& [k, v] : config_to_map(cfg)) canon += k + "=" + v + "\n";
  if (!cfg.filter_bank.empty()) {
    std::ifstream in(cfg.filter_bank, std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    canon += "filter_bank_bytes=" + hex64(fnv1a(bytes.str())) + "\n";
  }
  return hex64(fnv1a(canon));
}

void RunConfig::validate() const {
  if (manifest.empty()) synth.validate();
  else if (!fs::exists(manifest)) throw Error("manifest not found: " + manifest.string());
  if (!filter_bank.empty() && !fs::exists(filter_bank)) {
    throw Error("filter bank not found: " + filter_bank.string());
  }
  if (schemes.empty()) throw Error("config: no feature scheme selected");
  if (regimes.empty()) throw Error("config: no regime selected");
  if (active_regimes().empty()) throw Error("config: pairwise filter leaves no regime");
  if (height < 8 || width < 4) throw Error("config: crop size too small");
  if (strips < 1 || bins < 1) throw Error("config: strips and bins must be >= 1");
  if (!(C > 0)) throw Error("config: C must be positive");
  if (k < 1) throw Error("config: k must be >= 1");
  if (!(lambda >= 0)) throw Error("config: lambda must be >= 0");
  if (trees < 1) throw Error("config: trees must be >= 1");
}

std::vector<Regime> RunConfig::active_regimes() const {
  std::vector<Regime> out;
  for (Regime r : regimes) {
    if (r != Regime::IkSvm && !pairwise.empty() && uses_forest(r) != (pairwise == "forest")) {
      continue;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace pedattr
