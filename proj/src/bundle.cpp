#include "cellph/bundle.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "cellph/errors.hpp"

namespace cellph {

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct FileEntry {
  std::size_t count = 0;
  std::string hash;
};

class ManifestWriter {
 public:
  explicit ManifestWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::ostringstream& text() { return text_; }

  void write_matrix(const std::string& name, const Matrix& M) {
    write_f64(dir_ / name, M.data(), static_cast<std::size_t>(M.size()));
    text_ << "file " << name << ' ' << M.size() << ' '
          << hex64(hash_f64(M.data(), static_cast<std::size_t>(M.size()))) << '\n';
  }

  void finish() {
    const std::string body = text_.str();
    const std::filesystem::path tmp = dir_ / "manifest.txt.tmp";
    {
      std::ofstream f(tmp);
      if (!f) throw BundleError("cannot write manifest in " + dir_.string());
      f << body << "manifest_hash " << hex64(fnv1a64(body)) << '\n';
      if (!f) throw BundleError("manifest write failed in " + dir_.string());
    }
    std::filesystem::rename(tmp, dir_ / "manifest.txt");
  }

 private:
  std::filesystem::path dir_;
  std::ostringstream text_;
};

std::vector<std::string> words(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw BundleError("manifest: bad number '" + s + "'");
  }
  if (used != s.size()) throw BundleError("manifest: bad number '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw BundleError("manifest: bad integer '" + s + "'");
  }
  if (used != s.size()) throw BundleError("manifest: bad integer '" + s + "'");
  return v;
}

void need(const std::vector<std::string>& w, std::size_t n, const std::string& line) {
  if (w.size() != n) throw BundleError("manifest: malformed line '" + line + "'");
}

Matrix load_matrix(const std::filesystem::path& dir, const std::map<std::string, FileEntry>& files,
                   const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  const auto it = files.find(name);
  if (it == files.end()) throw BundleError("manifest lists no file " + name);
  if (it->second.count != static_cast<std::size_t>(rows * cols)) {
    throw BundleError(name + ": manifest size does not match the recorded shape");
  }
  std::vector<double> v;
  try {
    v = read_f64(dir / name);
  } catch (const std::exception& e) {
    throw BundleError(e.what());
  }
  if (v.size() != it->second.count) {
    throw BundleError(name + ": expected " + std::to_string(it->second.count) + " values, found " +
                      std::to_string(v.size()));
  }
  if (hex64(hash_f64(v.data(), v.size())) != it->second.hash) {
    throw BundleError(name + ": content hash mismatch");
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
}

}  // namespace

void Subdictionary::prepare() { whitener = Whitener(dce); }

Matrix Subdictionary::block(const Matrix& atoms) const {
  Matrix B(atoms.rows(), static_cast<Eigen::Index>(members.size()));
  for (std::size_t k = 0; k < members.size(); ++k) {
    B.col(static_cast<Eigen::Index>(k)) = atoms.col(static_cast<Eigen::Index>(members[k]));
  }
  return B;
}

std::vector<int> Bundle::assignment() const {
  std::vector<int> a(dict.labels.size(), -1);
  for (std::size_t i = 0; i < subs.size(); ++i) {
    for (std::size_t j : subs[i].members) a[j] = static_cast<int>(i);
  }
  return a;
}

Bundle build_bundle(const ForwardConfig& config, const BuildOptions& options) {
  if (options.log) options.log("generating " + std::to_string(options.grid.size()) + " atoms");
  Dictionary dict = generate(options.grid, config, options.generate);
  return build_bundle(config, std::move(dict), options);
}

Bundle build_bundle(const ForwardConfig& config, Dictionary dict, const BuildOptions& options) {
  if (options.k < 1) throw ConfigError("build: k must be >= 1");
  if (options.rank < 0) throw ConfigError("build: rank must be >= 0");
  auto log = [&](const std::string& s) {
    if (options.log) options.log(s);
  };
  Bundle b;
  b.config_hash = config_hash(config);
  b.seeds = options.seeds;
  b.rank_threshold = options.rank_threshold;
  b.dce_samples = options.dce.samples;
  b.dict = std::move(dict);
  const Matrix& atoms = b.dict.atoms;

  KMedoidsOptions km = options.kmedoids;
  km.seed = options.seeds.cluster;
  log("clustering into k=" + std::to_string(options.k));
  const Partition part = cluster(atoms, options.k, km);
  b.clustering_cost = part.cost;

  for (int c = 0; c < part.k(); ++c) {
    Subdictionary s;
    s.members = part.members(c);
    s.medoid = part.medoids[static_cast<std::size_t>(c)];
    const Matrix D = s.block(atoms);
    const int cap = static_cast<int>(std::min(D.rows(), D.cols()));
    s.rank = options.rank > 0 ? std::min(options.rank, cap) : select_rank(D, options.rank_threshold);
    NmfOptions nmf_opts = options.nmf;
    nmf_opts.seed = options.seeds.nmf + static_cast<std::uint64_t>(c);
    const NmfResult f = nmf(D, s.rank, nmf_opts);
    s.W = f.W;
    s.H = f.H;
    log("subdictionary " + std::to_string(c) + ": " + std::to_string(s.members.size()) +
        " atoms, rank " + std::to_string(s.rank) + ", NMF rel. error " + fmt17(f.relative_error(D)));
    DceOptions dce_opts = options.dce;
    dce_opts.seed = options.seeds.dce;
    s.dce = estimate_dce(b.dict, s.members, s.W, config, dce_opts, static_cast<std::uint64_t>(c));
    s.prepare();
    log("subdictionary " + std::to_string(c) + ": DCE from " + std::to_string(s.dce.samples) +
        " samples, ridge " + fmt17(s.dce.ridge));
    b.subs.push_back(std::move(s));
  }
  return b;
}

void save_bundle(const std::filesystem::path& dir, const Bundle& b) {
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / "manifest.txt");
  const Eigen::Index m = b.dict.atoms.rows();
  const std::size_t p = b.dict.labels.size();
  const GridSpec& g = b.dict.grid;

  ManifestWriter w(dir);
  auto& t = w.text();
  t << "cellph-bundle " << Bundle::kVersion << '\n'
    << "config_hash " << b.config_hash << '\n'
    << "m " << m << '\n'
    << "p " << p << '\n'
    << "grid_lo " << fmt17(g.lo[0]) << ' ' << fmt17(g.lo[1]) << ' ' << fmt17(g.lo[2]) << '\n'
    << "grid_hi " << fmt17(g.hi[0]) << ' ' << fmt17(g.hi[1]) << ' ' << fmt17(g.hi[2]) << '\n'
    << "grid_n " << g.n[0] << ' ' << g.n[1] << ' ' << g.n[2] << '\n'
    << "seeds " << b.seeds.cluster << ' ' << b.seeds.nmf << ' ' << b.seeds.dce << '\n'
    << "k " << b.subs.size() << '\n'
    << "rank_threshold " << fmt17(b.rank_threshold) << '\n'
    << "dce_samples " << b.dce_samples << '\n'
    << "clustering_cost " << fmt17(b.clustering_cost) << '\n';
  w.write_matrix("atoms.f64", b.dict.atoms);
  Matrix labels(3, static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    for (int a = 0; a < 3; ++a) labels(a, static_cast<Eigen::Index>(j)) = component(b.dict.labels[j], a);
  }
  w.write_matrix("labels.f64", labels);
  for (std::size_t i = 0; i < b.subs.size(); ++i) {
    const Subdictionary& s = b.subs[i];
    const std::string pre = "sub" + std::to_string(i) + "_";
    t << "sub " << i << " medoid " << s.medoid << " rank " << s.rank << " size " << s.members.size()
      << " dce_mode " << to_string(s.dce.mode) << " ridge " << fmt17(s.dce.ridge) << " samples "
      << s.dce.samples << " redraws " << s.dce.redraws << '\n';
    t << "members " << i;
    for (std::size_t j : s.members) t << ' ' << j;
    t << '\n';
    w.write_matrix(pre + "W.f64", s.W);
    w.write_matrix(pre + "H.f64", s.H);
    w.write_matrix(pre + "mu.f64", s.dce.mu);
    w.write_matrix(pre + "C.f64", s.dce.cov);
  }
  w.finish();
}

Bundle load_bundle(const std::filesystem::path& dir, const ForwardConfig* config) {
  std::ifstream f(dir / "manifest.txt");
  if (!f) throw BundleError("no manifest in " + dir.string() + " (missing or incomplete bundle)");
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) lines.push_back(line);
  if (lines.empty()) throw BundleError("empty manifest");

  std::string body;
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) body += lines[i] + '\n';
  const auto tail = words(lines.back());
  if (tail.size() != 2 || tail[0] != "manifest_hash" || tail[1] != hex64(fnv1a64(body))) {
    throw BundleError("manifest hash mismatch (corrupted manifest)");
  }
  const auto head = words(lines.front());
  if (head.size() != 2 || head[0] != "cellph-bundle") throw BundleError("not a bundle manifest");
  if (head[1] != std::to_string(Bundle::kVersion)) {
    throw BundleError("unsupported bundle version " + head[1]);
  }

  Bundle b;
  Eigen::Index m = 0;
  std::size_t p = 0, k = 0;
  std::map<std::string, FileEntry> files;
  struct SubHeader {
    std::size_t medoid = 0, size = 0;
    int rank = 0, samples = 0, redraws = 0;
    DceMode mode = DceMode::kDiagonal;
    double ridge = 0.0;
    std::vector<std::size_t> members;
    bool have_header = false, have_members = false;
  };
  std::map<std::size_t, SubHeader> subs;

  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    const std::string& line = lines[i];
    const auto w = words(line);
    if (w.empty()) continue;
    const std::string& key = w[0];
    if (key == "config_hash") {
      need(w, 2, line);
      b.config_hash = w[1];
    } else if (key == "m") {
      need(w, 2, line);
      m = static_cast<Eigen::Index>(to_u64(w[1]));
    } else if (key == "p") {
      need(w, 2, line);
      p = to_u64(w[1]);
    } else if (key == "grid_lo" || key == "grid_hi") {
      need(w, 4, line);
      auto& dst = key == "grid_lo" ? b.dict.grid.lo : b.dict.grid.hi;
      for (int a = 0; a < 3; ++a) dst[a] = to_double(w[static_cast<std::size_t>(a) + 1]);
    } else if (key == "grid_n") {
      need(w, 4, line);
      for (int a = 0; a < 3; ++a) b.dict.grid.n[a] = static_cast<int>(to_u64(w[static_cast<std::size_t>(a) + 1]));
    } else if (key == "seeds") {
      need(w, 4, line);
      b.seeds = {to_u64(w[1]), to_u64(w[2]), to_u64(w[3])};
    } else if (key == "k") {
      need(w, 2, line);
      k = to_u64(w[1]);
    } else if (key == "rank_threshold") {
      need(w, 2, line);
      b.rank_threshold = to_double(w[1]);
    } else if (key == "dce_samples") {
      need(w, 2, line);
      b.dce_samples = static_cast<int>(to_u64(w[1]));
    } else if (key == "clustering_cost") {
      need(w, 2, line);
      b.clustering_cost = to_double(w[1]);
    } else if (key == "file") {
      need(w, 4, line);
      files[w[1]] = {to_u64(w[2]), w[3]};
    } else if (key == "sub") {
      need(w, 16, line);
      auto& s = subs[to_u64(w[1])];
      if (w[2] != "medoid" || w[4] != "rank" || w[6] != "size" || w[8] != "dce_mode" ||
          w[10] != "ridge" || w[12] != "samples" || w[14] != "redraws") {
        throw BundleError("manifest: malformed line '" + line + "'");
      }
      s.medoid = to_u64(w[3]);
      s.rank = static_cast<int>(to_u64(w[5]));
      s.size = to_u64(w[7]);
      try {
        s.mode = parse_dce_mode(w[9]);
      } catch (const ConfigError& e) {
        throw BundleError(e.what());
      }
      s.ridge = to_double(w[11]);
      s.samples = static_cast<int>(to_u64(w[13]));
      s.redraws = static_cast<int>(to_u64(w[15]));
      s.have_header = true;
    } else if (key == "members") {
      if (w.size() < 2) throw BundleError("manifest: malformed line '" + line + "'");
      auto& s = subs[to_u64(w[1])];
      for (std::size_t j = 2; j < w.size(); ++j) s.members.push_back(to_u64(w[j]));
      s.have_members = true;
    } else {
      throw BundleError("manifest: unknown key '" + key + "'");
    }
  }

  if (config && config_hash(*config) != b.config_hash) {
    throw BundleError("bundle was built with config " + b.config_hash + ", current config is " +
                      config_hash(*config));
  }
  try {
    b.dict.grid.validate();
  } catch (const ConfigError& e) {
    throw BundleError(std::string("manifest grid: ") + e.what());
  }
  if (p != b.dict.grid.size()) throw BundleError("manifest: p does not match the grid");
  if (subs.size() != k) throw BundleError("manifest: k does not match the subdictionary entries");

  b.dict.atoms = load_matrix(dir, files, "atoms.f64", m, static_cast<Eigen::Index>(p));
  const Matrix labels = load_matrix(dir, files, "labels.f64", 3, static_cast<Eigen::Index>(p));
  b.dict.labels.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    for (int a = 0; a < 3; ++a) set_component(b.dict.labels[j], a, labels(a, static_cast<Eigen::Index>(j)));
  }

  for (std::size_t i = 0; i < k; ++i) {
    const auto it = subs.find(i);
    if (it == subs.end() || !it->second.have_header || !it->second.have_members) {
      throw BundleError("manifest: subdictionary " + std::to_string(i) + " incomplete");
    }
    SubHeader& h = it->second;
    if (h.members.size() != h.size) throw BundleError("manifest: member count mismatch");
    for (std::size_t j : h.members) {
      if (j >= p) throw BundleError("manifest: member index out of range");
    }
    Subdictionary s;
    s.members = std::move(h.members);
    s.medoid = h.medoid;
    s.rank = h.rank;
    const std::string pre = "sub" + std::to_string(i) + "_";
    s.W = load_matrix(dir, files, pre + "W.f64", m, s.rank);
    s.H = load_matrix(dir, files, pre + "H.f64", s.rank, static_cast<Eigen::Index>(s.members.size()));
    s.dce.mode = h.mode;
    s.dce.ridge = h.ridge;
    s.dce.samples = h.samples;
    s.dce.redraws = h.redraws;
    s.dce.mu = load_matrix(dir, files, pre + "mu.f64", m, 1);
    s.dce.cov = load_matrix(dir, files, pre + "C.f64", m, h.mode == DceMode::kFull ? m : 1);
    try {
      s.prepare();
    } catch (const ConfigError& e) {
      throw BundleError("subdictionary " + std::to_string(i) + ": " + e.what());
    }
    b.subs.push_back(std::move(s));
  }
  return b;
}

std::string validate_bundle(const std::filesystem::path& dir, const ForwardConfig* config) {
  const Bundle b = load_bundle(dir, config);
  const std::size_t p = b.dict.labels.size();
  std::vector<int> seen(p, 0);
  for (const auto& s : b.subs) {
    if (s.members.empty()) throw BundleError("empty subdictionary");
    if (std::find(s.members.begin(), s.members.end(), s.medoid) == s.members.end()) {
      throw BundleError("medoid is not a member of its subdictionary");
    }
    for (std::size_t j : s.members) ++seen[j];
    if (s.W.size() > 0 && s.W.minCoeff() < 0.0) throw BundleError("negative entry in W");
    if (s.H.size() > 0 && s.H.minCoeff() < 0.0) throw BundleError("negative entry in H");
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (seen[j] != 1) throw BundleError("atom " + std::to_string(j) + " is not in exactly one subdictionary");
  }
  if (b.dict.atoms.size() > 0 && b.dict.atoms.minCoeff() < 0.0) throw BundleError("negative atom entry");
  for (std::size_t j = 0; j < p; ++j) {
    if (!(b.dict.labels[j] == b.dict.grid.label(j))) throw BundleError("labels do not match the grid");
  }
  std::ostringstream out;
  out << "bundle ok: m=" << b.dict.atoms.rows() << " p=" << p << " k=" << b.k()
      << " config=" << b.config_hash;
  return out.str();
}

bool bitwise_equal(const Bundle& a, const Bundle& b) {
  if (a.config_hash != b.config_hash || !(a.dict.grid == b.dict.grid) || a.subs.size() != b.subs.size()) {
    return false;
  }
  if (!same(a.dict.atoms, b.dict.atoms) || a.dict.labels.size() != b.dict.labels.size()) return false;
  for (std::size_t j = 0; j < a.dict.labels.size(); ++j) {
    if (std::memcmp(&a.dict.labels[j], &b.dict.labels[j], sizeof(ParamVector)) != 0) return false;
  }
  for (std::size_t i = 0; i < a.subs.size(); ++i) {
    const auto &x = a.subs[i], &y = b.subs[i];
    if (x.members != y.members || x.medoid != y.medoid || x.rank != y.rank) return false;
    if (!same(x.W, y.W) || !same(x.H, y.H) || !same(x.dce.mu, y.dce.mu) || !same(x.dce.cov, y.dce.cov)) {
      return false;
    }
    if (x.dce.mode != y.dce.mode || std::memcmp(&x.dce.ridge, &y.dce.ridge, sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace cellph
