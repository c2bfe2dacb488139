#include "infantprints/aging.hpp"

#include "infantprints/image.hpp"

namespace infantprints::aging {

void AgingPolicy::validate() const
{
    if (!(lambda >= 1.0) || !std::isfinite(lambda))
        throw ValidationError("aging lambda must be >= 1");
    if (age_cutoff_weeks <= 0)
        throw ValidationError("age cutoff must be positive");
}

double select_scale_factor(int age_weeks_at_capture, const AgingPolicy& policy)
{
    if (age_weeks_at_capture < 0)
        throw ValidationError("age must be non-negative");
    return age_weeks_at_capture < policy.age_cutoff_weeks ? policy.lambda : 1.0;
}

MinutiaeSet age_minutiae_set(const MinutiaeSet& set, double lambda)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ValidationError("scale factor must be positive");
    MinutiaeSet out = set;
    for (auto& m : out.minutiae) {
        m.x *= lambda;
        m.y *= lambda;
    }
    return out;
}

GrayImage age_image(const GrayImage& img, double lambda)
{
    if (lambda == 1.0)
        return img;
    return scale_bicubic(img, lambda);
}

GrayImage downscale_for_external(const GrayImage& img)
{
    return scale_bicubic(img, 0.5);
}

Template age_enrollment(const Template& t, const AgingPolicy& policy)
{
    if (t.aged)
        return t;
    const double lambda = select_scale_factor(t.age_weeks_at_capture, policy);
    if (lambda == 1.0)
        return t;
    Template out = t;
    out.minutiae = age_minutiae_set(t.minutiae, lambda);
    out.aged = true;
    return out;
}

}  // namespace infantprints::aging
