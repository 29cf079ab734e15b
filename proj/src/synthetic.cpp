#include "manifold_id/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>

#include "manifold_id/errors.hpp"

namespace manifold_id {

ManifoldKind manifold_kind_from_string(const std::string& name) {
    if (name == "linear-gaussian") return ManifoldKind::LinearGaussian;
    if (name == "sphere") return ManifoldKind::Sphere;
    if (name == "nonlinear-lift") return ManifoldKind::NonlinearLift;
    throw InvalidArgument("unknown manifold kind '" + name + "'");
}

std::string to_string(ManifoldKind kind) {
    switch (kind) {
        case ManifoldKind::LinearGaussian: return "linear-gaussian";
        case ManifoldKind::Sphere: return "sphere";
        case ManifoldKind::NonlinearLift: return "nonlinear-lift";
    }
    throw InvalidArgument("invalid manifold kind");
}

namespace {

// Latent dimension fed to the orthonormal basis, i.e. the dimension of the
// flat space the class manifold lives in before embedding.
int basis_columns(const ClassSpec& cls) {
    switch (cls.kind) {
        case ManifoldKind::LinearGaussian: return cls.intrinsic_dim;
        case ManifoldKind::Sphere: return cls.intrinsic_dim + 1;  // S^d sits in R^{d+1}
        case ManifoldKind::NonlinearLift: return 2 * cls.intrinsic_dim;
    }
    throw InvalidArgument("invalid manifold kind");
}

void validate_spec(const SyntheticSpec& spec) {
    if (spec.classes.empty()) throw InvalidArgument("synthetic spec has no classes");
    int p = spec.classes.front().ambient_dim;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const ClassSpec& cls = spec.classes[c];
        std::string where = "class " + std::to_string(c) + ": ";
        if (cls.ambient_dim != p)
            throw InvalidArgument(where + "ambient_dim differs across classes");
        if (cls.intrinsic_dim < 1)
            throw InvalidArgument(where + "intrinsic_dim must be >= 1");
        if (cls.intrinsic_dim >= cls.ambient_dim)
            throw InvalidArgument(where + "intrinsic_dim " + std::to_string(cls.intrinsic_dim) +
                                  " must be < ambient_dim " + std::to_string(cls.ambient_dim));
        if (cls.samples < 1) throw InvalidArgument(where + "samples must be >= 1");
        if (cls.noise_sigma < 0.0) throw InvalidArgument(where + "noise_sigma must be >= 0");
        if (basis_columns(cls) > cls.ambient_dim)
            throw InvalidArgument(where + to_string(cls.kind) + " with d=" +
                                  std::to_string(cls.intrinsic_dim) + " needs ambient_dim >= " +
                                  std::to_string(basis_columns(cls)));
    }
}

// Orthonormal p x cols basis from a seeded gaussian draw (thin QR).
Eigen::MatrixXd random_basis(int p, int cols, std::mt19937_64& rng,
                             std::normal_distribution<double>& normal) {
    Eigen::MatrixXd G(p, cols);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < cols; ++j) G(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    return qr.householderQ() * Eigen::MatrixXd::Identity(p, cols);
}

} // namespace

LabeledEmbeddings generate_synthetic(const SyntheticSpec& spec) {
    validate_spec(spec);
    int p = spec.classes.front().ambient_dim;
    Eigen::Index total = 0;
    for (const ClassSpec& cls : spec.classes) total += cls.samples;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    LabeledEmbeddings out;
    out.embeddings.resize(total, p);
    out.labels.resize(total);
    out.class_count = static_cast<int>(spec.classes.size());

    Eigen::Index row = 0;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const ClassSpec& cls = spec.classes[c];
        int d = cls.intrinsic_dim;
        int cols = basis_columns(cls);
        Eigen::MatrixXd B = random_basis(p, cols, rng, normal);
        Eigen::VectorXd latent(cols);
        for (int s = 0; s < cls.samples; ++s, ++row) {
            switch (cls.kind) {
                case ManifoldKind::LinearGaussian:
                    for (int j = 0; j < cols; ++j) latent(j) = normal(rng);
                    break;
                case ManifoldKind::Sphere: {
                    for (int j = 0; j < cols; ++j) latent(j) = normal(rng);
                    double norm = latent.norm();
                    // A zero draw has probability 0; resample defensively.
                    while (norm == 0.0) {
                        for (int j = 0; j < cols; ++j) latent(j) = normal(rng);
                        norm = latent.norm();
                    }
                    latent /= norm;
                    break;
                }
                case ManifoldKind::NonlinearLift:
                    for (int j = 0; j < d; ++j) {
                        double u = normal(rng);
                        latent(2 * j) = std::sin(u);
                        latent(2 * j + 1) = std::cos(u);
                    }
                    break;
            }
            Eigen::VectorXd x = B * latent;
            if (cls.noise_sigma > 0.0)
                for (int i = 0; i < p; ++i) x(i) += cls.noise_sigma * normal(rng);
            out.embeddings.row(row) = x.transpose();
            out.labels[row] = static_cast<int>(c);
        }
    }
    return out;
}

} // namespace manifold_id
