#pragma once

#include <string>
#include <vector>

#include "ncp/matrix.hpp"
#include "ncp/postprocess.hpp"

namespace ncp {

struct CdfGrid {
    std::vector<double> points;  // strictly increasing
    std::vector<double> values;
};

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    double nominal_coverage = 0.0;
    double achieved_mass = 0.0;
};

// Conditioning on a single x, an axis-aligned box in x-space (inclusive
// bounds, original units), or an explicit 0/1 mask over the retained
// training rows.
struct ConditioningEvent {
    enum class Kind { Point, Box, Indicator };
    Kind kind = Kind::Point;
    std::vector<double> x;
    std::vector<double> lo, hi;
    std::vector<double> mask;

    static ConditioningEvent at(std::vector<double> point);
    static ConditioningEvent box(std::vector<double> lo, std::vector<double> hi);
    static ConditioningEvent indicator(std::vector<double> mask);
};

// Clamp to [0,1], project to the nearest nondecreasing sequence
// (pool-adjacent-violators), then rescale so the last value is 1.
CdfGrid sanitize_cdf(CdfGrid grid);

// Minimal-width window [t_lo, t_hi] with F(t_hi) - F(t_lo) >= 1 - alpha,
// ties broken towards the smallest t_lo. Throws if no window qualifies.
ConfidenceInterval interval_search(const CdfGrid& grid, double alpha);

std::string cdf_to_csv(const CdfGrid& grid);
std::string interval_to_json(const ConfidenceInterval& ci);

// Read-only statistics extractor over a recalibrated model. All conditional
// quantities come from one bilinear expansion: the marginal estimate plus
// sum_i psi_u_i(event) * mean(psi_v_i * f) over retained training rows, where
// psi are the mode-transformed features with sqrt(sigma) folded into each
// side. The model must outlive the engine.
class InferenceEngine {
public:
    explicit InferenceEngine(const WhitenedModel& model);

    int retained_rows() const { return psi_v_.rows; }
    int feature_dim() const { return psi_v_.cols; }
    int y_dim() const { return model_->base.train_y_values.cols; }

    // Transformed u-features of the event; for set events the mean over the
    // selected retained rows.
    std::vector<double> event_weights(const ConditioningEvent& ev) const;

    double cond_expectation(const std::vector<double>& f_values, const ConditioningEvent& ev) const;
    double cond_probability(const std::vector<double>& indicator, const ConditioningEvent& ev,
                            bool sanitized = false) const;
    CdfGrid cond_cdf(const ConditioningEvent& ev, const std::vector<double>& grid_points,
                     bool sanitize = true) const;
    double cond_quantile(const ConditioningEvent& ev, double q,
                         const std::vector<double>& grid_points) const;
    double cond_moment(const ConditioningEvent& ev, double order) const;
    double cond_mean(const ConditioningEvent& ev) const;
    Matrix cond_covariance(const ConditioningEvent& ev, bool psd_project = false) const;

    // 1000 points spanning [min y - 3 mad, max y + 3 mad] by default.
    std::vector<double> default_grid(int k = 1000) const;

private:
    const WhitenedModel* model_;
    Matrix psi_u_;  // n x d transformed features of retained x rows
    Matrix psi_v_;
    // Scalar-Y fast path: y values sorted ascending with per-column prefix
    // sums of the matching psi_v rows.
    std::vector<double> y_sorted_;
    Matrix v_prefix_;  // (n+1) x d

    std::vector<double> transform_u_rowvec(const Matrix& raw_row) const;
};

}  // namespace ncp
