#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "manifold_id/data.hpp"

namespace manifold_id {

enum class ManifoldKind {
    LinearGaussian,  // gaussian on a random d-dim subspace, orthonormal basis
    Sphere,          // uniform on S^{d-1} embedded in the first d coordinates
    NonlinearLift,   // gaussian d-dim latent lifted through sin/cos features
};

ManifoldKind manifold_kind_from_string(const std::string& name);
std::string to_string(ManifoldKind kind);

struct ClassSpec {
    int intrinsic_dim = 1;
    int ambient_dim = 2;
    int samples = 0;
    double noise_sigma = 0.0;
    ManifoldKind kind = ManifoldKind::LinearGaussian;
};

struct SyntheticSpec {
    std::vector<ClassSpec> classes;
    std::uint64_t seed = 0;
};

// Deterministic in spec.seed: identical spec -> bit-identical output. Classes
// are laid out consecutively (class c occupies the rows after class c-1).
// Throws InvalidArgument on bad dims/counts or mismatched ambient_dim.
LabeledEmbeddings generate_synthetic(const SyntheticSpec& spec);

} // namespace manifold_id
