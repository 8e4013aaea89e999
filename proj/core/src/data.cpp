#include "bfm/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "bfm/analysis.hpp"
#include "bfm/rng.hpp"

namespace bfm {

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::GaussianRing: return "gaussian_ring";
    case DatasetKind::Checkerboard: return "checkerboard";
    case DatasetKind::GaussianRandomField: return "grf";
    case DatasetKind::Generated: return "generated";
  }
  throw std::invalid_argument("to_string: bad DatasetKind");
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "gaussian_ring") return DatasetKind::GaussianRing;
  if (s == "checkerboard") return DatasetKind::Checkerboard;
  if (s == "grf") return DatasetKind::GaussianRandomField;
  if (s == "generated") return DatasetKind::Generated;
  throw std::invalid_argument("unknown dataset kind: " + s);
}

void DatasetSpec::validate() const {
  if (n_samples < 1) throw std::invalid_argument("DatasetSpec: n_samples must be >= 1");
  if (n_classes < 1) throw std::invalid_argument("DatasetSpec: n_classes must be >= 1");
  switch (kind) {
    case DatasetKind::GaussianRing:
      if (dim != 2) throw std::invalid_argument("DatasetSpec: gaussian_ring is 2-D");
      if (!(ring_radius > 0.0) || !(ring_sigma >= 0.0)) {
        throw std::invalid_argument("DatasetSpec: ring radius/sigma must be positive");
      }
      break;
    case DatasetKind::Checkerboard:
      if (dim != 2) throw std::invalid_argument("DatasetSpec: checkerboard is 2-D");
      if (checker_cells < 1 || !(checker_extent > 0.0)) {
        throw std::invalid_argument("DatasetSpec: bad checkerboard parameters");
      }
      break;
    case DatasetKind::GaussianRandomField: {
      if (side < 2 || (side & (side - 1)) != 0) {
        throw std::invalid_argument("DatasetSpec: GRF side must be a power of two >= 2");
      }
      if (!(grf_beta >= 0.0)) throw std::invalid_argument("DatasetSpec: beta must be >= 0");
      break;
    }
    case DatasetKind::Generated:
      if (dim < 1) throw std::invalid_argument("DatasetSpec: dim must be >= 1");
      break;
  }
}

SampleSet make_gaussian_ring(const DatasetSpec& spec) {
  spec.validate();
  if (spec.kind != DatasetKind::GaussianRing) {
    throw std::invalid_argument("make_gaussian_ring: wrong kind");
  }
  SampleSet set;
  set.dim = 2;
  set.rows.reserve(spec.n_samples);
  set.labels.reserve(spec.n_samples);
  Rng rng(spec.seed);
  for (int i = 0; i < spec.n_samples; ++i) {
    const int c = static_cast<int>(rng.uniform_int(0, spec.n_classes - 1));
    const double ang = 2.0 * std::numbers::pi * c / spec.n_classes;
    double z0, z1;
    rng.normal_pair(z0, z1);
    Vec x{f32_round(spec.ring_radius * std::cos(ang) + spec.ring_sigma * z0),
          f32_round(spec.ring_radius * std::sin(ang) + spec.ring_sigma * z1)};
    set.rows.push_back(std::move(x));
    set.labels.push_back(c);
  }
  return set;
}

SampleSet make_checkerboard(const DatasetSpec& spec) {
  spec.validate();
  if (spec.kind != DatasetKind::Checkerboard) {
    throw std::invalid_argument("make_checkerboard: wrong kind");
  }
  SampleSet set;
  set.dim = 2;
  const int cells = spec.checker_cells;
  const double cell = 2.0 * spec.checker_extent / cells;
  Rng rng(spec.seed);
  for (int i = 0; i < spec.n_samples; ++i) {
    const int cx = static_cast<int>(rng.uniform_int(0, cells - 1));
    const int cy = static_cast<int>(rng.uniform_int(0, cells - 1));
    const double x0 = -spec.checker_extent + cx * cell;
    const double y0 = -spec.checker_extent + cy * cell;
    Vec x{f32_round(x0 + rng.uniform() * cell), f32_round(y0 + rng.uniform() * cell)};
    set.rows.push_back(std::move(x));
    set.labels.push_back((cx + cy) % 2);
  }
  return set;
}

SampleSet make_grf_images(const DatasetSpec& spec) {
  spec.validate();
  if (spec.kind != DatasetKind::GaussianRandomField) {
    throw std::invalid_argument("make_grf_images: wrong kind");
  }
  const int N = spec.side;
  SampleSet set;
  set.dim = N * N;
  Rng rng(spec.seed);

  // amplitude ~ r^{-beta/2} with wraparound radius; DC = 0 keeps fields
  // zero-mean
  Vec amp(static_cast<std::size_t>(N) * N, 0.0);
  for (int u = 0; u < N; ++u) {
    for (int v = 0; v < N; ++v) {
      const double fu = std::min(u, N - u);
      const double fv = std::min(v, N - v);
      const double r = std::sqrt(fu * fu + fv * fv);
      if (r > 0.0) amp[static_cast<std::size_t>(u) * N + v] = std::pow(r, -spec.grf_beta / 2.0);
    }
  }

  std::vector<std::complex<double>> F(static_cast<std::size_t>(N) * N);
  for (int img = 0; img < spec.n_samples; ++img) {
    for (std::size_t i = 0; i < F.size(); ++i) {
      double zr, zi;
      rng.normal_pair(zr, zi);
      F[i] = std::complex<double>(zr, zi) * amp[i];
    }
    // Hermitian symmetrization F(k) <- (F(k) + conj(F(-k)))/2 makes the
    // inverse transform real.
    std::vector<std::complex<double>> H(F.size());
    for (int u = 0; u < N; ++u) {
      for (int v = 0; v < N; ++v) {
        const int mu = (N - u) % N;
        const int mv = (N - v) % N;
        H[static_cast<std::size_t>(u) * N + v] =
            0.5 * (F[static_cast<std::size_t>(u) * N + v] +
                   std::conj(F[static_cast<std::size_t>(mu) * N + mv]));
      }
    }
    fft2d(H, N, true);
    Vec x(set.dim);
    double mean = 0.0;
    for (int i = 0; i < set.dim; ++i) {
      x[i] = H[i].real();
      mean += x[i];
    }
    mean /= set.dim;
    double var = 0.0;
    for (int i = 0; i < set.dim; ++i) {
      x[i] -= mean;
      var += x[i] * x[i];
    }
    var /= set.dim;
    const double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (int i = 0; i < set.dim; ++i) x[i] = f32_round(x[i] * inv_std);
    set.rows.push_back(std::move(x));
    set.labels.push_back(0);
  }
  return set;
}

SampleSet make_dataset(const DatasetSpec& spec) {
  switch (spec.kind) {
    case DatasetKind::GaussianRing: return make_gaussian_ring(spec);
    case DatasetKind::Checkerboard: return make_checkerboard(spec);
    case DatasetKind::GaussianRandomField: return make_grf_images(spec);
    case DatasetKind::Generated:
      throw std::invalid_argument("make_dataset: 'generated' comes from the sampler");
  }
  throw std::invalid_argument("make_dataset: bad kind");
}

namespace {

constexpr char kMagic[4] = {'B', 'F', 'M', 'D'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

nlohmann::json spec_to_json(const DatasetSpec& s) {
  return {{"kind", to_string(s.kind)},   {"n_samples", s.n_samples},
          {"n_classes", s.n_classes},    {"dim", s.dim},
          {"side", s.side},              {"ring_radius", s.ring_radius},
          {"ring_sigma", s.ring_sigma},  {"checker_cells", s.checker_cells},
          {"checker_extent", s.checker_extent}, {"grf_beta", s.grf_beta},
          {"seed", s.seed}};
}

DatasetSpec spec_from_json(const nlohmann::json& j) {
  DatasetSpec s;
  s.kind = dataset_kind_from_string(j.at("kind").get<std::string>());
  s.n_samples = j.at("n_samples").get<int>();
  s.n_classes = j.at("n_classes").get<int>();
  s.dim = j.at("dim").get<int>();
  s.side = j.at("side").get<int>();
  s.ring_radius = j.at("ring_radius").get<double>();
  s.ring_sigma = j.at("ring_sigma").get<double>();
  s.checker_cells = j.at("checker_cells").get<int>();
  s.checker_extent = j.at("checker_extent").get<double>();
  s.grf_beta = j.at("grf_beta").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace

void save_dataset(const SampleSet& set, const DatasetSpec& spec, const std::string& path) {
  nlohmann::json header = {{"spec", spec_to_json(spec)},
                           {"n", set.size()},
                           {"dim", set.dim},
                           {"checksum", "crc32"}};
  const std::string hs = header.dump();

  std::string payload;
  payload.reserve(set.size() * (set.dim * 4 + 4));
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (static_cast<int>(set.rows[i].size()) != set.dim) {
      throw std::invalid_argument("save_dataset: ragged sample dimensions");
    }
    for (double v : set.rows[i]) put_f32(payload, static_cast<float>(v));
    put_u32(payload, static_cast<std::uint32_t>(set.labels[i]));
  }
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size()));

  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(hs.size()));
  out += hs;
  out += payload;
  put_u32(out, static_cast<std::uint32_t>(crc));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw format_error("save_dataset: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw format_error("save_dataset: write failed for " + path);
}

LoadedDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw format_error("load_dataset: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw format_error("load_dataset: truncated file " + path);
  };
  need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw format_error("load_dataset: bad magic in " + path);
  }
  pos = 4;
  need(2);
  const std::uint16_t version = static_cast<std::uint8_t>(bytes[pos]) |
                                (static_cast<std::uint8_t>(bytes[pos + 1]) << 8);
  pos += 2;
  if (version != kVersion) {
    throw format_error("load_dataset: unsupported version " + std::to_string(version));
  }
  need(4);
  std::uint32_t hlen = 0;
  for (int i = 0; i < 4; ++i) hlen |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos + i])) << (8 * i);
  pos += 4;
  need(hlen);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("load_dataset: bad header json: ") + e.what());
  }
  pos += hlen;

  LoadedDataset out;
  out.spec = spec_from_json(header.at("spec"));
  const std::size_t n = header.at("n").get<std::size_t>();
  const int dim = header.at("dim").get<int>();
  const std::size_t record = static_cast<std::size_t>(dim) * 4 + 4;
  if (bytes.size() - pos != n * record + 4) {
    throw format_error("load_dataset: declared record count does not match file size");
  }
  const char* payload = bytes.data() + pos;
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(payload), static_cast<uInt>(n * record));
  std::uint32_t stored = 0;
  const std::size_t cpos = pos + n * record;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[cpos + i])) << (8 * i);
  if (static_cast<std::uint32_t>(crc) != stored) {
    throw format_error("load_dataset: payload checksum mismatch");
  }

  out.set.dim = dim;
  out.set.rows.reserve(n);
  out.set.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const char* rec = payload + i * record;
    Vec row(dim);
    for (int d = 0; d < dim; ++d) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(rec[d * 4 + b])) << (8 * b);
      float fv;
      std::memcpy(&fv, &bits, 4);
      row[d] = static_cast<double>(fv);
    }
    std::uint32_t lab = 0;
    for (int b = 0; b < 4; ++b) lab |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(rec[dim * 4 + b])) << (8 * b);
    out.set.rows.push_back(std::move(row));
    out.set.labels.push_back(static_cast<int>(lab));
  }
  return out;
}

}  // namespace bfm
