#include "steinrul/dataset_cache.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "steinrul/error.hpp"

namespace steinrul {
namespace {

constexpr std::array<char, 8> kMagic{'S', 'R', 'U', 'L', 'W', 'I', 'N', '\0'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& file) : out_(file, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("cannot write cache " + file.string());
  }
  template <typename T>
  void pod(const T& v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
  template <typename T>
  void array(const std::vector<T>& v) {
    pod<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void finish() {
    out_.flush();
    if (!out_) throw DataError("failed writing dataset cache");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(std::ifstream& in) : in_(in) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  template <typename T>
  std::vector<T> array() {
    const auto n = pod<std::uint64_t>();
    if (n > (std::uint64_t{1} << 36)) throw DataError("dataset cache is corrupt (array length)");
    std::vector<T> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    check();
    return v;
  }
  std::string string() {
    const auto n = pod<std::uint64_t>();
    if (n > 4096) throw DataError("dataset cache is corrupt (string length)");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }

 private:
  void check() {
    if (!in_) throw DataError("dataset cache is truncated");
  }
  std::ifstream& in_;
};

void write_dataset(Writer& w, const WindowedDataset& d) {
  w.array(d.samples);
  w.array(d.targets);
  w.array(d.units);
  w.array(d.end_cycles);
}

WindowedDataset read_dataset(Reader& r, std::size_t window, std::size_t features) {
  WindowedDataset d;
  d.window = window;
  d.features = features;
  d.samples = r.array<double>();
  d.targets = r.array<double>();
  d.units = r.array<int>();
  d.end_cycles = r.array<int>();
  if (d.samples.size() != d.targets.size() * window * features || d.units.size() != d.targets.size() ||
      d.end_cycles.size() != d.targets.size()) {
    throw DataError("dataset cache is corrupt (inconsistent sizes)");
  }
  return d;
}

void hash_bytes(std::uint64_t& h, const char* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::uint64_t source_digest(const std::filesystem::path& data_dir, const SubsetConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& prefix : {"train_", "test_", "RUL_"}) {
    const auto file = data_dir / (std::string(prefix) + config.name + ".txt");
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open " + file.string());
    std::array<char, 1 << 16> buf;
    while (in) {
      in.read(buf.data(), buf.size());
      hash_bytes(h, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  const std::uint64_t t = config.window;
  hash_bytes(h, reinterpret_cast<const char*>(&t), sizeof(t));
  hash_bytes(h, reinterpret_cast<const char*>(&config.r_early), sizeof(double));
  for (std::uint64_t c : config.columns) hash_bytes(h, reinterpret_cast<const char*>(&c), sizeof(c));
  return h;
}

void save_prepared(const std::filesystem::path& file, const PreparedSubset& p,
                   std::uint64_t digest) {
  // Write to a sibling and rename so readers never see a partial file.
  const auto tmp = std::filesystem::path(file.string() + ".tmp");
  {
    Writer w(tmp);
    for (char c : kMagic) w.pod(c);
    w.pod(kCacheVersion);
    w.pod(digest);
    w.string(p.config.name);
    w.pod<std::uint64_t>(p.config.window);
    w.pod<std::uint64_t>(p.config.features());
    w.pod(p.config.r_early);
    std::vector<std::uint64_t> cols(p.config.columns.begin(), p.config.columns.end());
    w.array(cols);
    w.array(p.stats.min);
    w.array(p.stats.max);
    write_dataset(w, p.train);
    write_dataset(w, p.test);
    w.pod<std::uint64_t>(p.discarded_train);
    w.pod<std::uint64_t>(p.discarded_test);
    w.finish();
  }
  std::filesystem::rename(tmp, file);
}

std::optional<PreparedSubset> load_prepared(const std::filesystem::path& file,
                                            std::uint64_t digest) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  Reader r(in);
  std::array<char, 8> magic{};
  for (char& c : magic) c = r.pod<char>();
  if (magic != kMagic) throw DataError(file.string() + " is not a dataset cache");
  if (r.pod<std::uint32_t>() != kCacheVersion) return std::nullopt;
  if (r.pod<std::uint64_t>() != digest) return std::nullopt;

  const std::string name = r.string();
  PreparedSubset p;
  p.config = subset_config(name);
  const auto window = r.pod<std::uint64_t>();
  const auto features = r.pod<std::uint64_t>();
  const auto r_early = r.pod<double>();
  const auto cols = r.array<std::uint64_t>();
  if (window != p.config.window || features != p.config.features() || r_early != p.config.r_early ||
      !std::equal(cols.begin(), cols.end(), p.config.columns.begin(), p.config.columns.end())) {
    return std::nullopt;
  }
  p.stats.min = r.array<double>();
  p.stats.max = r.array<double>();
  if (p.stats.min.size() != features || p.stats.max.size() != features) {
    throw DataError("dataset cache is corrupt (normalization header)");
  }
  p.train = read_dataset(r, window, features);
  p.test = read_dataset(r, window, features);
  p.discarded_train = r.pod<std::uint64_t>();
  p.discarded_test = r.pod<std::uint64_t>();
  return p;
}

PreparedSubset load_or_prepare(const std::filesystem::path& data_dir,
                               const std::filesystem::path& cache_dir, const SubsetConfig& config,
                               bool* cache_hit) {
  if (cache_hit) *cache_hit = false;
  if (cache_dir.empty()) return prepare_subset(load_subset(data_dir, config.name), config);
  const std::uint64_t digest = source_digest(data_dir, config);
  const auto file = cache_dir / (config.name + "_T" + std::to_string(config.window) + ".bin");
  if (auto cached = load_prepared(file, digest)) {
    if (cache_hit) *cache_hit = true;
    return std::move(*cached);
  }
  PreparedSubset p = prepare_subset(load_subset(data_dir, config.name), config);
  std::filesystem::create_directories(cache_dir);
  save_prepared(file, p, digest);
  return p;
}

}  // namespace steinrul
