#pragma once

#include "infantprints/core.hpp"

namespace infantprints::aging {

// Static growth compensation: enrollments captured before `age_cutoff_weeks`
// are scaled by `lambda`.
struct AgingPolicy {
    double lambda = 1.1;
    int age_cutoff_weeks = 13;

    void validate() const;
};

// lambda when age < cutoff (strict), 1.0 otherwise.
double select_scale_factor(int age_weeks_at_capture, const AgingPolicy& policy);

// (x, y, theta) -> (lambda x, lambda y, theta), order preserved.
MinutiaeSet age_minutiae_set(const MinutiaeSet& set, double lambda);

// Bicubic resize by lambda; ppi metadata scales with it.
GrayImage age_image(const GrayImage& img, double lambda);

// Halves resolution ahead of an external image matcher.
GrayImage downscale_for_external(const GrayImage& img);

// Applies the policy to an enrollment template (no-op if already aged or the
// capture age is past the cutoff).
Template age_enrollment(const Template& t, const AgingPolicy& policy);

}  // namespace infantprints::aging
