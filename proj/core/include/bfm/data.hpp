#pragma once

#include <cstdint>
#include <string>

#include "bfm/sample_set.hpp"

namespace bfm {

enum class DatasetKind { GaussianRing, Checkerboard, GaussianRandomField, Generated };

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::GaussianRing;
  int n_samples = 8192;
  int n_classes = 8;
  int dim = 2;           // point datasets
  int side = 0;          // image datasets (N), dim = N*N
  double ring_radius = 1.0;
  double ring_sigma = 0.1;
  int checker_cells = 4;       // cells per side
  double checker_extent = 2.0; // grid covers [-extent, extent]^2
  double grf_beta = 2.0;       // radial power ~ r^-beta
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const DatasetSpec&) const = default;
};

// Class c is an isotropic Gaussian at angle 2*pi*c/n_classes on the ring.
SampleSet make_gaussian_ring(const DatasetSpec& spec);

// Uniform samples over a cells x cells grid; the label is the cell color
// parity (cx + cy) mod 2, so each class is one of the two interleaved
// checkerboards.
SampleSet make_checkerboard(const DatasetSpec& spec);

// Real Gaussian random fields with expected radial power ~ r^-beta,
// unit-variance normalized, flattened N*N rows.
SampleSet make_grf_images(const DatasetSpec& spec);

SampleSet make_dataset(const DatasetSpec& spec);

// Dataset file ("BFMD"): u16 version, u32-length-prefixed JSON header, n
// records of dim little-endian f32 plus a u32 label, trailing CRC32 of the
// record bytes.
void save_dataset(const SampleSet& set, const DatasetSpec& spec, const std::string& path);

struct LoadedDataset {
  SampleSet set;
  DatasetSpec spec;
};

LoadedDataset load_dataset(const std::string& path);

}  // namespace bfm
