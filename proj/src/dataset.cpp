#include "pedattr/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pedattr/error.hpp"
#include "pedattr/random.hpp"

namespace pedattr {

namespace fs = std::filesystem;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Verify: return "verify";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view token) {
  if (token == "train") return Split::Train;
  if (token == "verify") return Split::Verify;
  if (token == "test") return Split::Test;
  throw Error("unknown split '" + std::string(token) + "'");
}

std::size_t AttributeRegistry::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw Error("unknown attribute '" + std::string(name) + "'");
}

ClassCounts AttributeRegistry::count(std::size_t attr,
                                     std::optional<Split> split) const {
  const std::size_t slot = split ? static_cast<std::size_t>(*split) : 3;
  return counts.at(attr)[slot];
}

void recount(AttributeRegistry& registry, const std::vector<Sample>& samples) {
  registry.counts.assign(registry.names.size(), {});
  for (const Sample& s : samples) {
    if (s.labels.size() != registry.names.size()) {
      throw Error("sample '" + s.id + "' has " +
                  std::to_string(s.labels.size()) + " labels, registry has " +
                  std::to_string(registry.names.size()));
    }
    const std::size_t slot = s.split ? static_cast<std::size_t>(*s.split) : 3;
    for (std::size_t a = 0; a < s.labels.size(); ++a) {
      if (s.labels[a] == Label::Positive) ++registry.counts[a][slot].positives;
      if (s.labels[a] == Label::Negative) ++registry.counts[a][slot].negatives;
    }
  }
}

AttributeRegistry make_registry(std::vector<std::string> names,
                                const std::vector<Sample>& samples) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw Error("empty attribute name");
    if (!seen.insert(n).second) throw Error("duplicate attribute '" + n + "'");
  }
  AttributeRegistry reg;
  reg.names = std::move(names);
  recount(reg, samples);
  return reg;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

bool absent(const std::string& field) { return field.empty() || field == "-"; }

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

cv::Mat read_rgb(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error("cannot read image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

cv::Mat read_mask(const fs::path& path) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw Error("cannot read mask " + path.string());
  cv::Mat bin;
  // >= 128 is foreground
  cv::threshold(gray, bin, 127, 1, cv::THRESH_BINARY);
  return bin;
}

char label_token(Label l) {
  switch (l) {
    case Label::Positive: return '1';
    case Label::Negative: return '0';
    case Label::Unknown: return '?';
  }
  return '?';
}

}  // namespace

Dataset load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> attr_names;
  bool have_header = false;
  std::vector<Sample> samples;
  std::set<std::string> ids;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (!have_header) {
      if (fields.size() < 4 || fields[0] != "id" || fields[1] != "image" ||
          fields[2] != "mask" || fields[3] != "split") {
        throw Error("manifest line " + std::to_string(lineno) +
                    ": expected header 'id<TAB>image<TAB>mask<TAB>split<TAB>...'");
      }
      attr_names.assign(fields.begin() + 4, fields.end());
      have_header = true;
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw Error("manifest line " + std::to_string(lineno) + ": " + why);
    };
    if (fields.size() != 4 + attr_names.size()) {
      fail("expected " + std::to_string(4 + attr_names.size()) +
           " fields, found " + std::to_string(fields.size()));
    }
    Sample s;
    s.id = fields[0];
    if (s.id.empty()) fail("empty id");
    if (!ids.insert(s.id).second) fail("duplicate id '" + s.id + "'");
    if (absent(fields[1])) fail("missing image path");
    s.image_path = fields[1];
    if (!absent(fields[2])) s.mask_path = fields[2];
    if (!absent(fields[3])) {
      try {
        s.split = parse_split(fields[3]);
      } catch (const Error& e) {
        fail(e.what());
      }
    }
    s.labels.reserve(attr_names.size());
    for (std::size_t a = 0; a < attr_names.size(); ++a) {
      const std::string& tok = fields[4 + a];
      if (tok == "1") s.labels.push_back(Label::Positive);
      else if (tok == "0") s.labels.push_back(Label::Negative);
      else if (tok == "?") s.labels.push_back(Label::Unknown);
      else fail("bad label token '" + tok + "' for " + attr_names[a]);
    }
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw Error("no samples in manifest " + path.string());

  for (Sample& s : samples) {
    s.image = read_rgb(resolve(base, s.image_path));
    if (!s.mask_path.empty()) {
      cv::Mat m = read_mask(resolve(base, s.mask_path));
      if (m.size() != s.image.size()) {
        throw Error("sample '" + s.id + "': mask is " + std::to_string(m.cols) +
                    "x" + std::to_string(m.rows) + " but image is " +
                    std::to_string(s.image.cols) + "x" +
                    std::to_string(s.image.rows));
      }
      s.mask = std::move(m);
    }
  }

  Dataset ds;
  ds.registry = make_registry(std::move(attr_names), samples);
  ds.samples = std::move(samples);
  return ds;
}

void write_manifest(const fs::path& path, const AttributeRegistry& registry,
                    const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << "id\timage\tmask\tsplit";
  for (const auto& n : registry.names) out << '\t' << n;
  out << '\n';
  for (const Sample& s : samples) {
    if (s.image_path.empty()) throw Error("sample '" + s.id + "' has no image path");
    out << s.id << '\t' << s.image_path << '\t'
        << (s.mask_path.empty() ? "-" : s.mask_path) << '\t'
        << (s.split ? to_string(*s.split) : "-");
    for (Label l : s.labels) out << '\t' << label_token(l);
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

fs::path save_dataset(const fs::path& dir, const AttributeRegistry& registry,
                      std::vector<Sample>& samples) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  for (Sample& s : samples) {
    cv::Mat bgr;
    cv::cvtColor(s.image, bgr, cv::COLOR_RGB2BGR);
    s.image_path = "images/" + s.id + ".png";
    if (!cv::imwrite((dir / s.image_path).string(), bgr)) {
      throw Error("cannot write " + (dir / s.image_path).string());
    }
    if (s.mask) {
      s.mask_path = "masks/" + s.id + ".png";
      cv::Mat m = *s.mask * 255;
      if (!cv::imwrite((dir / s.mask_path).string(), m)) {
        throw Error("cannot write " + (dir / s.mask_path).string());
      }
    } else {
      s.mask_path.clear();
    }
  }
  const fs::path manifest = dir / "manifest.tsv";
  write_manifest(manifest, registry, samples);
  return manifest;
}

std::vector<Sample> split_partition(std::vector<Sample> samples,
                                    SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0.0 && ratios.verify > 0.0 && ratios.test > 0.0)) {
    throw Error("split ratios must all be positive");
  }
  const double sum = ratios.train + ratios.verify + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error("split ratios sum to " + std::to_string(sum) + ", expected 1");
  }
  const std::size_t n = samples.size();
  const auto n_train = static_cast<std::size_t>(std::llround(n * ratios.train));
  const auto n_verify = static_cast<std::size_t>(std::llround(n * ratios.verify));
  if (n_train + n_verify > n) throw Error("split ratios overflow sample count");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(order, rng);
  for (std::size_t r = 0; r < n; ++r) {
    Split s = r < n_train                ? Split::Train
              : r < n_train + n_verify ? Split::Verify
                                       : Split::Test;
    samples[order[r]].split = s;
  }
  return samples;
}

}  // namespace pedattr
