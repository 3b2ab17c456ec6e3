#include "fedsem/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

namespace fedsem {
namespace {

constexpr std::array<char, 4> kMagic{'F', 'S', 'C', 'T'};
constexpr std::uint8_t kVersion = 1;

// Reads exactly n bytes, tracking the absolute offset for error messages.
class ByteReader {
 public:
  explicit ByteReader(std::istream& is) : is_(is) {}

  void read(char* out, std::size_t n, const char* what) {
    is_.read(out, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::uint64_t>(is_.gcount());
    offset_ += got;
    if (got != n) throw FormatError(std::string("truncated ") + what, offset_);
  }

  std::uint8_t u8(const char* what) {
    char c;
    read(&c, 1, what);
    return static_cast<std::uint8_t>(c);
  }

  std::uint64_t le(std::size_t bytes, const char* what) {
    std::array<char, 8> buf{};
    read(buf.data(), bytes, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes; ++i) v |= std::uint64_t{static_cast<unsigned char>(buf[i])} << (8 * i);
    return v;
  }

  int peek() { return is_.peek(); }
  int get() {
    const int c = is_.get();
    if (c != std::char_traits<char>::eof()) ++offset_;
    return c;
  }
  std::uint64_t offset() const { return offset_; }

 private:
  std::istream& is_;
  std::uint64_t offset_ = 0;
};

void put_le(std::ostream& os, std::uint64_t v, std::size_t bytes) {
  for (std::size_t i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Header token of a PPM file, skipping whitespace and '#' comments.
std::uint64_t ppm_number(ByteReader& r, const char* what) {
  int c = r.get();
  while (true) {
    if (c == '#') {
      while (c != '\n' && c != std::char_traits<char>::eof()) c = r.get();
    } else if (std::isspace(c)) {
      c = r.get();
    } else {
      break;
    }
  }
  if (!std::isdigit(c)) throw FormatError(std::string("expected PPM ") + what, r.offset());
  std::uint64_t v = 0;
  while (std::isdigit(c)) {
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
    if (v > (1u << 24)) throw FormatError(std::string("PPM ") + what + " too large", r.offset());
    c = r.get();
  }
  if (!std::isspace(c)) throw FormatError(std::string("PPM ") + what + " not followed by whitespace", r.offset());
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string(), 0);
  return is;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot create " + path.string(), 0);
  return os;
}

}  // namespace

void Corpus::validate() const {
  if (images.empty()) throw FormatError("corpus is empty", 0);
  if (!labels.empty() && labels.size() != images.size()) throw FormatError("label count differs from image count", 0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != images.front().shape()) {
      throw FormatError("image " + std::to_string(i) + " has shape " + shape_string(images[i].shape()), 0);
    }
    const auto& d = images[i].data();
    if (!d.allFinite() || d.minCoeff() < 0.0 || d.maxCoeff() > 1.0) {
      throw FormatError("image " + std::to_string(i) + " has pixels outside [0,1]", 0);
    }
  }
}

Corpus Corpus::select(const std::vector<std::size_t>& indices) const {
  Corpus out;
  out.images.reserve(indices.size());
  for (std::size_t i : indices) {
    out.images.push_back(images.at(i));
    if (labeled()) out.labels.push_back(labels.at(i));
  }
  return out;
}

std::vector<std::size_t> Partition::sizes() const {
  std::vector<std::size_t> s;
  for (const auto& c : clients) s.push_back(c.size());
  return s;
}

std::vector<std::size_t> largest_remainder(const std::vector<double>& proportions, std::size_t total) {
  const double sum = std::accumulate(proportions.begin(), proportions.end(), 0.0);
  if (proportions.empty() || !(sum > 0.0)) throw UsageError("largest_remainder needs positive proportions");
  std::vector<std::size_t> counts(proportions.size());
  std::vector<double> frac(proportions.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    const double exact = proportions[k] / sum * static_cast<double>(total);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    frac[k] = exact - std::floor(exact);
    assigned += counts[k];
  }
  std::vector<std::size_t> order(proportions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size(), ++assigned) ++counts[order[i]];
  return counts;
}

Partition dirichlet_partition(const Corpus& corpus, std::size_t clients, double alpha, std::mt19937_64& rng,
                              int max_attempts) {
  if (clients < 1) throw ConfigError("partition needs at least one client");
  if (!(alpha > 0.0)) throw ConfigError("Dirichlet concentration must be > 0");
  if (!corpus.labeled()) throw ConfigError("Dirichlet partitioning needs a labeled corpus");
  if (corpus.size() < clients) throw ConfigError("fewer images than clients");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_class[corpus.labels[i]].push_back(i);

  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Partition part;
    part.alpha = alpha;
    part.clients.resize(clients);
    bool degenerate = false;
    for (auto& [label, indices] : by_class) {
      std::vector<std::size_t> shuffled = indices;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::vector<double> p(clients);
      for (auto& v : p) v = gamma(rng);
      if (std::accumulate(p.begin(), p.end(), 0.0) <= 0.0) {
        degenerate = true;
        break;
      }
      const auto counts = largest_remainder(p, shuffled.size());
      std::size_t at = 0;
      for (std::size_t k = 0; k < clients; ++k) {
        for (std::size_t j = 0; j < counts[k]; ++j) part.clients[k].push_back(shuffled[at++]);
      }
    }
    if (degenerate) continue;
    const bool any_empty =
        std::any_of(part.clients.begin(), part.clients.end(), [](const auto& c) { return c.empty(); });
    if (any_empty) continue;
    for (auto& c : part.clients) std::sort(c.begin(), c.end());
    return part;
  }
  throw ConfigError("Dirichlet partition left a client empty after " + std::to_string(max_attempts) +
                    " draws; use fewer clients or a larger concentration");
}

Corpus synth_corpus(int classes, int per_class, Index channels, Index height, Index width, std::uint64_t seed) {
  if (classes < 1 || per_class < 1) throw ConfigError("synthetic corpus needs classes >= 1 and per_class >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double kTwoPi = 6.283185307179586;

  std::vector<Tensor> bases;
  for (int c = 0; c < classes; ++c) {
    Tensor base({channels, height, width});
    for (Index ch = 0; ch < channels; ++ch) {
      const double offset = 0.3 + 0.4 * unit(rng);
      double fx[2], fy[2], phase[2], amp[2];
      for (int w = 0; w < 2; ++w) {
        fx[w] = 1.0 + std::floor(3.0 * unit(rng));
        fy[w] = 1.0 + std::floor(3.0 * unit(rng));
        phase[w] = kTwoPi * unit(rng);
        amp[w] = 0.1 + 0.1 * unit(rng);
      }
      for (Index y = 0; y < height; ++y) {
        for (Index x = 0; x < width; ++x) {
          double v = offset;
          for (int w = 0; w < 2; ++w) {
            v += amp[w] * std::sin(kTwoPi * (fx[w] * static_cast<double>(x) / static_cast<double>(width) +
                                             fy[w] * static_cast<double>(y) / static_cast<double>(height)) +
                                   phase[w]);
          }
          base[(ch * height + y) * width + x] = v;
        }
      }
    }
    bases.push_back(std::move(base));
  }

  Corpus corpus;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Tensor img = bases[static_cast<std::size_t>(c)];
      const double brightness = 0.05 * gauss(rng);
      for (Index j = 0; j < img.size(); ++j) {
        img[j] = std::clamp(img[j] + brightness + 0.03 * gauss(rng), 0.0, 1.0);
      }
      corpus.images.push_back(std::move(img));
      corpus.labels.push_back(c);
    }
  }
  return corpus;
}

std::uint64_t corpus_hash(const Corpus& corpus) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (int l : corpus.labels) mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(l)));
  for (const auto& img : corpus.images) {
    for (Index d : img.shape()) mix(static_cast<std::uint64_t>(d));
    for (Index i = 0; i < img.size(); ++i) mix(std::bit_cast<std::uint64_t>(img[i]));
  }
  return h;
}

std::pair<Corpus, Corpus> split_validation(const Corpus& corpus, std::size_t validation, std::mt19937_64& rng) {
  if (validation >= corpus.size()) throw ConfigError("validation split leaves no training images");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(validation));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(validation), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {corpus.select(train), corpus.select(val)};
}

void write_tensor(std::ostream& os, const Tensor& t) {
  if (t.rank() < 1 || t.rank() > 255) throw UsageError("tensor rank must be in [1, 255]");
  os.write(kMagic.data(), kMagic.size());
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(t.rank()));
  for (Index d : t.shape()) {
    if (d > 0xffffffffLL) throw UsageError("tensor dimension exceeds u32");
    put_le(os, static_cast<std::uint64_t>(d), 4);
  }
  for (Index i = 0; i < t.size(); ++i) put_le(os, std::bit_cast<std::uint64_t>(t[i]), 8);
  if (!os) throw FormatError("write failed", 0);
}

Tensor read_tensor(std::istream& is) {
  ByteReader r(is);
  std::array<char, 4> magic{};
  r.read(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw FormatError("bad magic, expected FSCT", 0);
  const std::uint8_t version = r.u8("version");
  if (version != kVersion) throw FormatError("unsupported version " + std::to_string(version), 4);
  const std::uint8_t rank = r.u8("rank");
  if (rank == 0) throw FormatError("rank must be >= 1", 5);
  Shape shape;
  Index count = 1;
  for (int i = 0; i < rank; ++i) {
    const auto at = r.offset();
    const auto d = static_cast<Index>(r.le(4, "dimension"));
    if (d == 0) throw FormatError("zero dimension", at);
    if (count > (Index{1} << 40) / d) throw FormatError("tensor too large", at);
    count *= d;
    shape.push_back(d);
  }
  Eigen::VectorXd data(count);
  for (Index i = 0; i < count; ++i) {
    const auto at = r.offset();
    data[i] = std::bit_cast<double>(r.le(8, "payload"));
    if (!std::isfinite(data[i])) throw FormatError("non-finite value in payload", at);
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  auto os = open_out(path);
  write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_tensor(is);
}

Tensor read_ppm(std::istream& is) {
  ByteReader r(is);
  std::array<char, 2> magic{};
  r.read(magic.data(), 2, "PPM magic");
  if (magic[0] != 'P' || magic[1] != '6') throw FormatError("not a binary PPM (P6)", 0);
  const auto width = static_cast<Index>(ppm_number(r, "width"));
  const auto height = static_cast<Index>(ppm_number(r, "height"));
  const auto header_end = r.offset();
  const auto maxval = ppm_number(r, "maxval");
  if (width == 0 || height == 0) throw FormatError("PPM has zero size", header_end);
  if (maxval != 255) throw FormatError("only maxval 255 is supported, got " + std::to_string(maxval), header_end);
  std::vector<char> raw(static_cast<std::size_t>(width * height * 3));
  r.read(raw.data(), raw.size(), "PPM pixel data");
  Tensor t({3, height, width});
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      for (Index c = 0; c < 3; ++c) {
        const auto byte = static_cast<unsigned char>(raw[static_cast<std::size_t>((y * width + x) * 3 + c)]);
        t[(c * height + y) * width + x] = static_cast<double>(byte) / 255.0;
      }
    }
  }
  return t;
}

Tensor load_ppm(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_ppm(is);
}

void save_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw UsageError("PPM export needs a (3, H, W) tensor");
  const Index h = image.dim(1), w = image.dim(2);
  auto os = open_out(path);
  os << "P6\n" << w << ' ' << h << "\n255\n";
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      for (Index c = 0; c < 3; ++c) {
        const double v = std::clamp(image[(c * h + y) * w + x], 0.0, 1.0);
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
}

Corpus load_corpus(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  Corpus corpus;
  if (fs::is_directory(path)) {
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_directory()) class_dirs.push_back(e.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    for (std::size_t c = 0; c < class_dirs.size(); ++c) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(class_dirs[c])) {
        if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        corpus.images.push_back(load_ppm(f));
        corpus.labels.push_back(static_cast<int>(c));
      }
    }
  } else {
    const Tensor all = load_tensor(path);
    if (all.rank() != 4) throw FormatError("corpus tensor must have rank 4 (N, C, H, W)", 5);
    const Index n = all.dim(0);
    const Shape img{all.dim(1), all.dim(2), all.dim(3)};
    const Index per = shape_size(img);
    for (Index i = 0; i < n; ++i) corpus.images.emplace_back(img, all.data().segment(i * per, per));
    fs::path sidecar = path;
    sidecar.replace_extension(".labels.fsct");
    if (fs::exists(sidecar)) {
      const Tensor labels = load_tensor(sidecar);
      if (labels.size() != n) throw FormatError("label sidecar has " + std::to_string(labels.size()) + " entries", 6);
      for (Index i = 0; i < n; ++i) corpus.labels.push_back(static_cast<int>(labels[i]));
    }
  }
  corpus.validate();
  return corpus;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  corpus.validate();
  const Shape& img = corpus.image_shape();
  const Index per = shape_size(img);
  Tensor all({static_cast<Index>(corpus.size()), img[0], img[1], img[2]});
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    all.data().segment(static_cast<Index>(i) * per, per) = corpus.images[i].data();
  }
  save_tensor(path, all);
  if (corpus.labeled()) {
    Tensor labels({static_cast<Index>(corpus.size())});
    for (std::size_t i = 0; i < corpus.size(); ++i) labels[static_cast<Index>(i)] = corpus.labels[i];
    std::filesystem::path sidecar = path;
    sidecar.replace_extension(".labels.fsct");
    save_tensor(sidecar, labels);
  }
}

}  // namespace fedsem
