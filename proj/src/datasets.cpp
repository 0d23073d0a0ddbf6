#include "ncp/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ncp/rng.hpp"

namespace ncp {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Family-specific random state derived from the spec seed. Stream 0 feeds
// once-per-spec parameters (mixture components, sphere lift), stream 1 feeds
// the sample draws, so regenerating with a different n keeps the same law.
Rng param_rng(const GeneratorSpec& spec) { return Rng(mix_seed(spec.seed, 0)); }
Rng data_rng(const GeneratorSpec& spec) { return Rng(mix_seed(spec.seed, 1)); }

struct MixtureParams {
    // 5 bivariate kernels over (x, y).
    std::vector<double> weight;
    std::vector<double> mx, my;            // component means
    std::vector<double> vxx, vxy, vyy;     // component covariances
};

MixtureParams mixture_params(const GeneratorSpec& spec) {
    int k = static_cast<int>(spec.param("components", 5));
    if (k < 1) throw std::invalid_argument("mixture needs at least one component");
    Rng rng = param_rng(spec);
    MixtureParams p;
    p.weight.resize(k);
    p.mx.resize(k);
    p.my.resize(k);
    p.vxx.resize(k);
    p.vxy.resize(k);
    p.vyy.resize(k);
    for (int c = 0; c < k; ++c) {
        p.mx[c] = rng.normal(0.0, std::sqrt(2.0));
        p.my[c] = rng.normal(0.0, std::sqrt(2.0));
    }
    for (int c = 0; c < k; ++c) {
        double a11 = rng.normal(), a12 = rng.normal();
        double a21 = rng.normal(), a22 = rng.normal();
        p.vxx[c] = a11 * a11 + a12 * a12 + 0.5;
        p.vxy[c] = a11 * a21 + a12 * a22;
        p.vyy[c] = a21 * a21 + a22 * a22 + 0.5;
    }
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
        double e = -std::log(1.0 - rng.uniform());
        p.weight[c] = std::max(e, 1e-12);
        total += p.weight[c];
    }
    for (double& w : p.weight) w /= total;
    return p;
}

// Orthonormal pair of columns in R^dim lifting the unit circle.
Matrix sphere_lift(const GeneratorSpec& spec, int dim) {
    Rng rng = param_rng(spec);
    Matrix q(dim, 2);
    for (int i = 0; i < dim; ++i) q(i, 0) = rng.normal();
    for (int i = 0; i < dim; ++i) q(i, 1) = rng.normal();
    double n0 = 0.0;
    for (int i = 0; i < dim; ++i) n0 += q(i, 0) * q(i, 0);
    n0 = std::sqrt(n0);
    for (int i = 0; i < dim; ++i) q(i, 0) /= n0;
    double dot = 0.0;
    for (int i = 0; i < dim; ++i) dot += q(i, 0) * q(i, 1);
    double n1 = 0.0;
    for (int i = 0; i < dim; ++i) {
        q(i, 1) -= dot * q(i, 0);
        n1 += q(i, 1) * q(i, 1);
    }
    n1 = std::sqrt(n1);
    for (int i = 0; i < dim; ++i) q(i, 1) /= n1;
    return q;
}

double sphere_theta(const GeneratorSpec& spec, const std::vector<double>& x, int dim) {
    if (static_cast<int>(x.size()) != dim) throw std::invalid_argument("conditioning row has wrong width");
    Matrix q = sphere_lift(spec, dim);
    double c0 = 0.0, c1 = 0.0;
    for (int i = 0; i < dim; ++i) {
        c0 += q(i, 0) * x[i];
        c1 += q(i, 1) * x[i];
    }
    double theta = std::atan2(c1, c0);
    if (theta < 0.0) theta += 2.0 * kPi;
    return theta;
}

const double kSphereQuadrantPmf[4][5] = {
    {0.2, 0.2, 0.2, 0.2, 0.2},
    {0.5, 0.5, 0.0, 0.0, 0.0},
    {0.0, 0.0, 1.0, 0.0, 0.0},
    {0.0, 0.0, 0.0, 0.5, 0.5},
};

int sphere_quadrant(double theta) {
    int q = static_cast<int>(theta / (kPi / 2.0));
    return std::min(std::max(q, 0), 3);
}

double laplace_cdf(double t, double loc, double scale) {
    if (!(scale > 0.0)) return t >= loc ? 1.0 : 0.0;
    double z = (t - loc) / scale;
    return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

double cauchy_cdf(double t, double loc, double scale) {
    return 0.5 + std::atan((t - loc) / scale) / kPi;
}

struct LggmdLaw {
    // Conditional law given the first three coordinates: either a symmetric
    // two-component normal mixture or a single normal.
    bool mixture;
    double m1, s1, m2, s2;  // mixture means and stddevs
    double m, s;            // single-component mean and stddev
};

LggmdLaw lggmd_law(double x1, double x2, double x3) {
    LggmdLaw law{};
    if (x2 <= 0.2) {
        law.mixture = true;
        law.m1 = 0.25 * x1 - 0.5;
        law.s1 = std::abs(0.5 * (0.25 * x3 + 0.5));
        law.m2 = 0.25 * x1 + 0.5;
        law.s2 = std::abs(0.5 * (0.25 * x3 - 0.5));
    } else {
        law.mixture = false;
        law.m = 0.25 * x1 - 0.5;
        law.s = std::sqrt(0.3);
    }
    return law;
}

double simpson(double (*f)(double, double), double h, double lo, double hi) {
    double mid = 0.5 * (lo + hi);
    return (hi - lo) / 6.0 * (f(lo, h) + 4.0 * f(mid, h) + f(hi, h));
}

double owen_integrand(double x, double h) {
    return std::exp(-0.5 * h * h * (1.0 + x * x)) / (1.0 + x * x);
}

double adaptive_owen(double h, double lo, double hi, double whole, int depth) {
    double mid = 0.5 * (lo + hi);
    double left = simpson(owen_integrand, h, lo, mid);
    double right = simpson(owen_integrand, h, mid, hi);
    if (depth <= 0 || std::abs(left + right - whole) < 1e-12)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_owen(h, lo, mid, left, depth - 1) + adaptive_owen(h, mid, hi, right, depth - 1);
}

}  // namespace

double norm_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double owen_t(double h, double a) {
    if (a == 0.0 || std::isnan(a) || std::isnan(h)) return 0.0;
    if (a < 0.0) return -owen_t(h, -a);
    if (a > 1.0) {
        // T(h,a) = 1/2 [Phi(h) + Phi(ah)] - Phi(h) Phi(ah) - T(ah, 1/a)
        double ph = norm_cdf(h), pah = norm_cdf(a * h);
        return 0.5 * (ph + pah) - ph * pah - owen_t(a * h, 1.0 / a);
    }
    double whole = simpson(owen_integrand, h, 0.0, a);
    return adaptive_owen(h, 0.0, a, whole, 40) / (2.0 * kPi);
}

double GeneratorSpec::param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

Family family_from_string(const std::string& name) {
    if (name == "linear_gaussian") return Family::LinearGaussian;
    if (name == "econ_density") return Family::EconDensity;
    if (name == "arma_jump") return Family::ArmaJump;
    if (name == "skew_normal") return Family::SkewNormal;
    if (name == "gaussian_mixture") return Family::GaussianMixture;
    if (name == "lggmd") return Family::Lggmd;
    if (name == "laplace") return Family::LaplaceModel;
    if (name == "cauchy") return Family::CauchyModel;
    if (name == "sphere_hd") return Family::SphereHD;
    if (name == "independent") return Family::Independent;
    throw std::invalid_argument("unknown dataset family: " + name);
}

std::string family_to_string(Family f) {
    switch (f) {
        case Family::LinearGaussian: return "linear_gaussian";
        case Family::EconDensity: return "econ_density";
        case Family::ArmaJump: return "arma_jump";
        case Family::SkewNormal: return "skew_normal";
        case Family::GaussianMixture: return "gaussian_mixture";
        case Family::Lggmd: return "lggmd";
        case Family::LaplaceModel: return "laplace";
        case Family::CauchyModel: return "cauchy";
        case Family::SphereHD: return "sphere_hd";
        case Family::Independent: return "independent";
    }
    throw std::invalid_argument("unknown dataset family enum");
}

int x_dim_of(const GeneratorSpec& spec) {
    switch (spec.family) {
        case Family::Lggmd: return 20;
        case Family::SphereHD: return static_cast<int>(spec.param("dim", 100));
        case Family::Independent: return static_cast<int>(spec.param("x_dim", 1));
        default: return 1;
    }
}

int y_dim_of(const GeneratorSpec&) { return 1; }

bool has_true_cdf(Family f) {
    switch (f) {
        case Family::GaussianMixture:
        case Family::LinearGaussian:
        case Family::EconDensity:
        case Family::ArmaJump:
        case Family::SkewNormal:
        case Family::Lggmd:
        case Family::LaplaceModel:
        case Family::CauchyModel:
        case Family::SphereHD:
        case Family::Independent:
            return true;
    }
    return false;
}

SampleSet generate(const GeneratorSpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("sample count must be >= 1");
    SampleSet out;
    out.seed = spec.seed;
    int n = spec.n;
    Rng rng = data_rng(spec);

    switch (spec.family) {
        case Family::LinearGaussian: {
            out.x = Matrix(n, 1);
            out.y = Matrix(n, 1);
            double sd = std::sqrt(spec.param("noise_var", 0.1));
            for (int i = 0; i < n; ++i) {
                double x = rng.uniform(-1.0, 1.0);
                out.x(i, 0) = x;
                out.y(i, 0) = x + rng.normal(0.0, sd);
            }
            break;
        }
        case Family::EconDensity: {
            out.x = Matrix(n, 1);
            out.y = Matrix(n, 1);
            for (int i = 0; i < n; ++i) {
                double x = std::abs(rng.normal());
                out.x(i, 0) = x;
                out.y(i, 0) = x * x + rng.normal(0.0, std::sqrt(1.0 + x));
            }
            break;
        }
        case Family::ArmaJump: {
            double c = spec.param("c", 0.1);
            double alpha = spec.param("alpha", 0.2);
            double p = spec.param("jump_prob", 0.05);
            if (p < 0.0 || p > 1.0) throw std::invalid_argument("jump probability must be in [0,1]");
            out.x = Matrix(n, 1);
            out.y = Matrix(n, 1);
            double prev = c;
            for (int i = 0; i < n; ++i) {
                double eps = rng.normal(0.0, std::sqrt(0.05));
                bool jump = rng.uniform() < p;
                double next = c * (1.0 - alpha) + alpha * prev + (jump ? -3.0 * c + 2.0 * eps : eps);
                out.x(i, 0) = prev;
                out.y(i, 0) = next;
                prev = next;
            }
            break;
        }
        case Family::SkewNormal: {
            out.x = Matrix(n, 1);
            out.y = Matrix(n, 1);
            for (int i = 0; i < n; ++i) {
                double x = rng.uniform(-1.0, 1.0);
                double loc = 0.5 * x;
                double scale = 0.6 + 0.2 * x;
                double shape = 4.0 * x;
                double delta = shape / std::sqrt(1.0 + shape * shape);
                double n0 = rng.normal(), n1 = rng.normal();
                out.x(i, 0) = x;
                out.y(i, 0) = loc + scale * (delta * std::abs(n0) +
                                             std::sqrt(1.0 - delta * delta) * n1);
            }
            break;
        }
        case Family::GaussianMixture: {
            MixtureParams p = mixture_params(spec);
            int k = static_cast<int>(p.weight.size());
            out.x = Matrix(n, 1);
            out.y = Matrix(n, 1);
            for (int i = 0; i < n; ++i) {
                double u = rng.uniform();
                int c = 0;
                double acc = 0.0;
                for (; c < k - 1; ++c) {
                    acc += p.weight[c];
                    if (u < acc) break;
                }
                // Sample from the component via its Cholesky factor.
                double l11 = std::sqrt(p.vxx[c]);
                double l21 = p.vxy[c] / l11;
                double l22 = std::sqrt(std::max(p.vyy[c] - l21 * l21, 1e-12));
                double g1 = rng.normal(), g2 = rng.normal();
                out.x(i, 0) = p.mx[c] + l11 * g1;
                out.y(i, 0) = p.my[c] + l21 * g1 + l22 * g2;
            }
            break;
        }
        case Family::Lggmd: {
            out.x = Matrix(n, 20);
            out.y = Matrix(n, 1);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < 20; ++j) out.x(i, j) = rng.uniform(-1.0, 1.0);
                LggmdLaw law = lggmd_law(out.x(i, 0), out.x(i, 1), out.x(i, 2));
                if (law.mixture) {
                    bool first = rng.uniform() < 0.5;
                    out.y(i, 0) = first ? rng.normal(law.m1, law.s1) : rng.normal(law.m2, law.s2);
                } else {
                    out.y(i, 0) = rng.normal(law.m, law.s);
                }
            }
            break;
        }
        case Family::LaplaceModel: {
            out.x = Matrix(n, 1);
            out.y = Matrix(n, 1);
            for (int i = 0; i < n; ++i) {
                double x = rng.uniform(0.0, 5.0);
                double u = rng.uniform() - 0.5;
                double mag = std::log(std::max(1.0 - 2.0 * std::abs(u), 1e-300));
                out.x(i, 0) = x;
                out.y(i, 0) = x * x - x * (u < 0.0 ? -1.0 : 1.0) * mag;
            }
            break;
        }
        case Family::CauchyModel: {
            out.x = Matrix(n, 1);
            out.y = Matrix(n, 1);
            for (int i = 0; i < n; ++i) {
                double x = rng.uniform(0.0, 5.0);
                out.x(i, 0) = x;
                out.y(i, 0) = x * x + (1.0 + x) * std::tan(kPi * (rng.uniform() - 0.5));
            }
            break;
        }
        case Family::SphereHD: {
            int dim = static_cast<int>(spec.param("dim", 100));
            if (dim < 2) throw std::invalid_argument("sphere dimension must be >= 2");
            bool discrete = spec.param("discrete", 0.0) != 0.0;
            Matrix q = sphere_lift(spec, dim);
            out.x = Matrix(n, dim);
            out.y = Matrix(n, 1);
            for (int i = 0; i < n; ++i) {
                double theta = 2.0 * kPi * rng.uniform();
                double c0 = std::cos(theta), c1 = std::sin(theta);
                for (int j = 0; j < dim; ++j) out.x(i, j) = q(j, 0) * c0 + q(j, 1) * c1;
                if (discrete) {
                    const double* pmf = kSphereQuadrantPmf[sphere_quadrant(theta)];
                    double u = rng.uniform();
                    double acc = 0.0;
                    int label = 4;
                    for (int s = 0; s < 5; ++s) {
                        acc += pmf[s];
                        if (u < acc) {
                            label = s;
                            break;
                        }
                    }
                    out.y(i, 0) = label + 1.0;
                } else {
                    double sd = std::sqrt(std::max(std::sin(theta / 2.0), 0.0));
                    out.y(i, 0) = rng.normal(theta, sd);
                }
            }
            break;
        }
        case Family::Independent: {
            int dx = static_cast<int>(spec.param("x_dim", 1));
            if (dx < 1) throw std::invalid_argument("x_dim must be >= 1");
            out.x = Matrix(n, dx);
            out.y = Matrix(n, 1);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < dx; ++j) out.x(i, j) = rng.uniform(-1.0, 1.0);
                out.y(i, 0) = rng.normal();
            }
            break;
        }
    }
    if (!all_finite(out.x) || !all_finite(out.y))
        throw std::runtime_error("generator produced non-finite samples");
    return out;
}

double true_cdf(const GeneratorSpec& spec, const std::vector<double>& x, double t) {
    if (x.empty()) throw std::invalid_argument("conditioning row is empty");
    double x0 = x[0];
    switch (spec.family) {
        case Family::LinearGaussian:
            return norm_cdf((t - x0) / std::sqrt(spec.param("noise_var", 0.1)));
        case Family::EconDensity:
            return norm_cdf((t - x0 * x0) / std::sqrt(1.0 + x0));
        case Family::ArmaJump: {
            double c = spec.param("c", 0.1);
            double alpha = spec.param("alpha", 0.2);
            double p = spec.param("jump_prob", 0.05);
            double m = c * (1.0 - alpha) + alpha * x0;
            return (1.0 - p) * norm_cdf((t - m) / std::sqrt(0.05)) +
                   p * norm_cdf((t - m + 3.0 * c) / std::sqrt(0.2));
        }
        case Family::SkewNormal: {
            double loc = 0.5 * x0;
            double scale = 0.6 + 0.2 * x0;
            double shape = 4.0 * x0;
            double z = (t - loc) / scale;
            return std::min(std::max(norm_cdf(z) - 2.0 * owen_t(z, shape), 0.0), 1.0);
        }
        case Family::GaussianMixture: {
            MixtureParams p = mixture_params(spec);
            int k = static_cast<int>(p.weight.size());
            double wsum = 0.0, acc = 0.0;
            std::vector<double> w(k);
            for (int c = 0; c < k; ++c) {
                double dx = x0 - p.mx[c];
                w[c] = p.weight[c] * std::exp(-0.5 * dx * dx / p.vxx[c]) / std::sqrt(p.vxx[c]);
                wsum += w[c];
            }
            if (!(wsum > 0.0)) throw std::domain_error("conditioning point has zero density");
            for (int c = 0; c < k; ++c) {
                double cm = p.my[c] + p.vxy[c] / p.vxx[c] * (x0 - p.mx[c]);
                double cv = p.vyy[c] - p.vxy[c] * p.vxy[c] / p.vxx[c];
                acc += w[c] / wsum * norm_cdf((t - cm) / std::sqrt(std::max(cv, 1e-12)));
            }
            return acc;
        }
        case Family::Lggmd: {
            if (x.size() < 3) throw std::invalid_argument("conditioning row needs 3 coordinates");
            LggmdLaw law = lggmd_law(x[0], x[1], x[2]);
            if (law.mixture)
                return 0.5 * norm_cdf((t - law.m1) / law.s1) + 0.5 * norm_cdf((t - law.m2) / law.s2);
            return norm_cdf((t - law.m) / law.s);
        }
        case Family::LaplaceModel:
            return laplace_cdf(t, x0 * x0, x0);
        case Family::CauchyModel:
            return cauchy_cdf(t, x0 * x0, 1.0 + x0);
        case Family::SphereHD: {
            int dim = static_cast<int>(spec.param("dim", 100));
            double theta = sphere_theta(spec, x, dim);
            if (spec.param("discrete", 0.0) != 0.0) {
                const double* pmf = kSphereQuadrantPmf[sphere_quadrant(theta)];
                double acc = 0.0;
                for (int s = 0; s < 5; ++s)
                    if (s + 1.0 <= t) acc += pmf[s];
                return acc;
            }
            double var = std::max(std::sin(theta / 2.0), 0.0);
            if (var < 1e-12) return t >= theta ? 1.0 : 0.0;
            return norm_cdf((t - theta) / std::sqrt(var));
        }
        case Family::Independent:
            return norm_cdf(t);
    }
    throw std::invalid_argument("family has no closed-form conditional cdf");
}

CsvSplit load_csv(const std::string& path, const std::vector<std::string>& x_cols,
                  const std::vector<std::string>& y_cols, double train_frac, double val_frac,
                  std::uint64_t seed) {
    if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0 + 1e-12)
        throw std::invalid_argument("split fractions must be nonnegative and sum to <= 1");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open csv: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    auto col_index = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error("csv column not found: " + name);
        return static_cast<int>(it - header.begin());
    };
    std::vector<int> xi, yi;
    for (const auto& c : x_cols) xi.push_back(col_index(c));
    for (const auto& c : y_cols) yi.push_back(col_index(c));

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::runtime_error("csv parse failure at row " + std::to_string(lineno));
            }
        }
        if (row.size() != header.size())
            throw std::runtime_error("csv parse failure at row " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    int n = static_cast<int>(rows.size());
    if (n < 1) throw std::runtime_error("csv has no data rows: " + path);

    Rng rng(seed);
    std::vector<int> order = rng.permutation(n);
    int n_train = static_cast<int>(std::llround(n * train_frac));
    int n_val = static_cast<int>(std::llround(n * val_frac));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    int n_test = n - n_train - n_val;

    auto take = [&](int begin, int count) {
        SampleSet s;
        s.seed = seed;
        s.x = Matrix(count, static_cast<int>(xi.size()));
        s.y = Matrix(count, static_cast<int>(yi.size()));
        for (int r = 0; r < count; ++r) {
            const auto& row = rows[order[begin + r]];
            for (std::size_t c = 0; c < xi.size(); ++c) s.x(r, static_cast<int>(c)) = row[xi[c]];
            for (std::size_t c = 0; c < yi.size(); ++c) s.y(r, static_cast<int>(c)) = row[yi[c]];
        }
        return s;
    };
    CsvSplit split;
    split.train = take(0, n_train);
    split.val = take(n_train, n_val);
    split.test = take(n_train + n_val, n_test);
    return split;
}

}  // namespace ncp
