#include "pedattr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "pedattr/error.hpp"
#include "pedattr/random.hpp"

namespace pedattr {

std::string synth_attribute_name(SynthAttribute a) {
  switch (a) {
    case SynthAttribute::UpperRed: return "upperRed";
    case SynthAttribute::LowerDark: return "lowerDark";
    case SynthAttribute::Hat: return "hat";
    case SynthAttribute::Bag: return "carryingBag";
    case SynthAttribute::Stripes: return "upperStripes";
    case SynthAttribute::LongHair: return "longHair";
  }
  return "?";
}

void SynthConfig::validate() const {
  if (n < 4) throw Error("synthetic dataset needs n >= 4");
  if (attrs < 1 || attrs > kSynthAttributes) {
    throw Error("synthetic attrs must be in [1, " + std::to_string(kSynthAttributes) + "]");
  }
  if (!(noise >= 0.0 && noise < 1.0)) throw Error("synthetic noise must be in [0, 1)");
  if (cluster_size < 1) throw Error("cluster_size must be >= 1");
  if (identity_splits && n / cluster_size < 3) {
    throw Error("identity splits need at least 3 identities");
  }
  if (height < 64 || width < 32) throw Error("synthetic crops must be at least 64x32");
}

std::string SynthConfig::dataset_id() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "synthetic-n%zu-a%zu-noise%.4f-seed%llu-c%zu-%dx%d-%s", n,
                attrs, noise, static_cast<unsigned long long>(seed), cluster_size, height, width,
                identity_splits ? "idsplit" : "nosplit");
  return buf;
}

namespace {

using Color = cv::Vec3d;

// Prevalence of each attribute among identities.
constexpr std::array<double, kSynthAttributes> kPrevalence = {0.4, 0.5, 0.3, 0.35, 0.3, 0.4};

const std::array<Color, 6> kShirtPalette = {Color{40, 70, 190},  Color{40, 150, 60},
                                            Color{130, 130, 130}, Color{210, 200, 60},
                                            Color{225, 225, 225}, Color{120, 60, 150}};

const std::array<Color, 3> kHatPalette = {Color{240, 220, 30}, Color{30, 210, 230},
                                          Color{230, 40, 200}};
const std::array<Color, 3> kBagPalette = {Color{170, 95, 30}, Color{20, 20, 20},
                                          Color{235, 120, 20}};

struct Identity {
  std::vector<bool> traits;  // one per cue kind, labeled or nuisance
  Color background;
  Color pattern;
  int period = 8;
  int orientation = 0;
  Color skin;
  Color shirt;  // used when the shirt is not red
  Color red;
  Color legs_hue;
  Color hat;
  Color hair;
  Color bag;
};

Color random_color(Rng& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

Identity make_identity(Rng& rng, std::size_t attrs) {
  Identity id;
  id.traits.resize(kSynthAttributes);
  for (int a = 0; a < kSynthAttributes; ++a) {
    id.traits[a] = bernoulli(rng, static_cast<std::size_t>(a) < attrs ? kPrevalence[a] : 0.5);
  }
  id.background = random_color(rng, 30, 220);
  id.pattern = random_color(rng, -50, 50);
  id.period = 3 + static_cast<int>(uniform_index(rng, 10));
  id.orientation = static_cast<int>(uniform_index(rng, 3));
  const double tone = uniform(rng, 0.45, 1.0);
  id.skin = Color{230, 180, 140} * tone;
  id.shirt = kShirtPalette[uniform_index(rng, kShirtPalette.size())] +
             random_color(rng, -15, 15);
  id.red = Color{uniform(rng, 180, 230), uniform(rng, 15, 45), uniform(rng, 20, 50)};
  id.legs_hue = random_color(rng, 60, 200);
  id.hat = kHatPalette[uniform_index(rng, kHatPalette.size())] + random_color(rng, -10, 10);
  id.hair = Color{90, 60, 30} * uniform(rng, 0.2, 1.4);
  id.bag = kBagPalette[uniform_index(rng, kBagPalette.size())] + random_color(rng, -10, 10);
  return id;
}

cv::Scalar scalar(const Color& c) { return {c[0], c[1], c[2]}; }

void fill(cv::Mat& img, cv::Mat& mask, const cv::Rect& r, const Color& c) {
  const cv::Rect clipped = r & cv::Rect(0, 0, img.cols, img.rows);
  if (clipped.empty()) return;
  img(clipped).setTo(scalar(c));
  mask(clipped).setTo(1);
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg) { return generate_synthetic(cfg, nullptr); }

Dataset generate_synthetic(const SynthConfig& cfg, std::vector<SynthRender>* renders) {
  cfg.validate();
  const std::size_t identities = std::max<std::size_t>(2, cfg.n / cfg.cluster_size);
  Rng id_rng(derive_seed(cfg.seed, 1));
  std::vector<Identity> people;
  people.reserve(identities);
  for (std::size_t p = 0; p < identities; ++p) people.push_back(make_identity(id_rng, cfg.attrs));

  std::vector<Split> identity_split(identities, Split::Train);
  if (cfg.identity_splits) {
    std::vector<std::size_t> order(identities);
    for (std::size_t p = 0; p < identities; ++p) order[p] = p;
    Rng split_rng(derive_seed(cfg.seed, 2));
    shuffle(order, split_rng);
    const auto n_train = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(identities * cfg.ratios.train)));
    const auto n_verify = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(identities * cfg.ratios.verify)));
    for (std::size_t r = 0; r < identities; ++r) {
      identity_split[order[r]] = r < n_train              ? Split::Train
                                 : r < n_train + n_verify ? Split::Verify
                                                          : Split::Test;
    }
  }

  std::vector<std::string> names;
  for (std::size_t a = 0; a < cfg.attrs; ++a) {
    names.push_back(synth_attribute_name(static_cast<SynthAttribute>(a)));
  }

  const int H = cfg.height, W = cfg.width;
  // layout on a 128x48 reference frame
  const double sy = H / 128.0, sx = W / 48.0;
  auto R = [&](int x0, int y0, int x1, int y1, int dx, int dy) {
    const int a = static_cast<int>(std::lround(x0 * sx)) + dx;
    const int b = static_cast<int>(std::lround(y0 * sy)) + dy;
    const int c = static_cast<int>(std::lround(x1 * sx)) + dx;
    const int d = static_cast<int>(std::lround(y1 * sy)) + dy;
    return cv::Rect(a, b, c - a, d - b);
  };

  std::vector<Sample> samples;
  samples.reserve(cfg.n);
  if (renders) renders->clear();
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Rng rng(derive_seed(cfg.seed, 1000 + i));
    const Identity& who = people[i % identities];

    SynthRender rd;
    rd.cue.resize(kSynthAttributes);
    for (int a = 0; a < kSynthAttributes; ++a) {
      rd.cue[a] = who.traits[a];
      if (static_cast<std::size_t>(a) < cfg.attrs && cfg.noise > 0 && bernoulli(rng, cfg.noise)) {
        rd.cue[a] = !rd.cue[a];
      }
    }
    rd.dx = static_cast<int>(uniform_index(rng, 5)) - 2;
    rd.dy = static_cast<int>(uniform_index(rng, 5)) - 2;
    const double gain = uniform(rng, 0.95, 1.05);

    cv::Mat img(H, W, CV_64FC3);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const int t = who.orientation == 0 ? y : who.orientation == 1 ? x : x + y;
        const bool on = (t / who.period) % 2 == 0;
        img.at<Color>(y, x) = on ? who.background + who.pattern : who.background;
      }
    }
    cv::Mat mask = cv::Mat::zeros(H, W, CV_8U);
    const int dx = rd.dx, dy = rd.dy;

    const bool upper_red = rd.cue[0], lower_dark = rd.cue[1], hat = rd.cue[2];
    const bool bag = rd.cue[3], stripes = rd.cue[4], long_hair = rd.cue[5];

    if (long_hair) fill(img, mask, R(14, 7, 34, 42, dx, dy), who.hair);
    else fill(img, mask, R(17, 7, 31, 12, dx, dy), who.hair);
    fill(img, mask, R(18, 11, 30, 24, dx, dy), who.skin);
    if (hat) {
      fill(img, mask, R(16, 1, 32, 11, dx, dy), who.hat);
      fill(img, mask, R(12, 9, 36, 13, dx, dy), who.hat * 0.7);
    }

    const Color shirt = upper_red ? who.red : who.shirt;
    const cv::Rect torso = R(12, 24, 36, 72, dx, dy);
    fill(img, mask, torso, shirt);
    if (stripes) {
      const int band = std::max(2, static_cast<int>(std::lround(4 * sy)));
      for (int y = torso.y; y < torso.y + torso.height; y += 2 * band) {
        fill(img, mask, cv::Rect(torso.x, y, torso.width, std::min(band, torso.y + torso.height - y)),
             shirt * 0.45);
      }
    }
    const Color legs = lower_dark ? who.legs_hue * 0.2 : who.legs_hue * 0.6 + Color{90, 90, 90};
    fill(img, mask, R(14, 72, 23, 124, dx, dy), legs);
    fill(img, mask, R(25, 72, 34, 124, dx, dy), legs);
    if (bag) {
      fill(img, mask, R(33, 24, 37, 42, dx, dy), who.bag * 0.6);
      fill(img, mask, R(33, 40, 47, 76, dx, dy), who.bag);
    }

    cv::Mat out(H, W, CV_8UC3);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const Color c = img.at<Color>(y, x);
        cv::Vec3b& o = out.at<cv::Vec3b>(y, x);
        for (int k = 0; k < 3; ++k) {
          const double v = c[k] * gain + normal(rng, 0.0, 4.0);
          o[k] = static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }

    Sample s;
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "syn%05zu", i);
    s.id = idbuf;
    s.image = out;
    s.mask = mask;
    if (cfg.identity_splits) s.split = identity_split[i % identities];
    for (std::size_t a = 0; a < cfg.attrs; ++a) {
      s.labels.push_back(who.traits[a] ? Label::Positive : Label::Negative);
    }
    samples.push_back(std::move(s));
    if (renders) renders->push_back(std::move(rd));
  }

  Dataset ds;
  ds.registry = make_registry(std::move(names), samples);
  ds.samples = std::move(samples);
  return ds;
}

}  // namespace pedattr
