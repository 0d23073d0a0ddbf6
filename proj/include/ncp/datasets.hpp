#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ncp/matrix.hpp"

namespace ncp {

struct SampleSet {
    Matrix x;  // n x d_x
    Matrix y;  // n x d_y
    std::uint64_t seed = 0;
};

enum class Family {
    LinearGaussian,
    EconDensity,
    ArmaJump,
    SkewNormal,
    GaussianMixture,
    Lggmd,
    LaplaceModel,
    CauchyModel,
    SphereHD,
    Independent,  // product law: X and Y independent
};

Family family_from_string(const std::string& name);
std::string family_to_string(Family f);

// params carries family-specific overrides; unspecified keys fall back to the
// documented defaults (see generate() in datasets.cpp).
struct GeneratorSpec {
    Family family = Family::LinearGaussian;
    int n = 1000;
    std::uint64_t seed = 0;
    std::map<std::string, double> params;

    double param(const std::string& key, double fallback) const;
};

// Deterministic for a fixed spec. Throws std::invalid_argument on bad params.
SampleSet generate(const GeneratorSpec& spec);

// Exact conditional CDF P[Y <= t | X = x] for families that admit one.
// x is the full conditioning row (scalar families read x[0]).
double true_cdf(const GeneratorSpec& spec, const std::vector<double>& x, double t);
bool has_true_cdf(Family f);

// Dimensions produced by generate() for this spec.
int x_dim_of(const GeneratorSpec& spec);
int y_dim_of(const GeneratorSpec& spec);

// Seeded shuffle + split of a headered CSV. Fractions must sum to <= 1; the
// test split takes the remainder of the first two.
struct CsvSplit {
    SampleSet train, val, test;
};
CsvSplit load_csv(const std::string& path, const std::vector<std::string>& x_cols,
                  const std::vector<std::string>& y_cols, double train_frac, double val_frac,
                  std::uint64_t seed);

// Owen's T function, used by the skew-normal CDF; adaptive Simpson, abs tol ~1e-10.
double owen_t(double h, double a);

// Standard normal CDF.
double norm_cdf(double z);

}  // namespace ncp
