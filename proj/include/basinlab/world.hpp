#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "basinlab/vec.hpp"

namespace basinlab {

/// One isotropic Gaussian component of a condition's mixture.
struct GmmComponent {
    double weight = 0.0;
    Vec mean;
    double sigma = 0.0;  // per-component isotropic std, >= 0
};

/// A conditioning label and its data distribution. A condition flagged
/// memorized must carry exactly one dominant near-delta component (the toy
/// stand-in for a duplicate-heavy prompt).
struct Condition {
    std::string id;
    std::vector<GmmComponent> components;
    bool memorized = false;

    const GmmComponent& dominant() const;
};

/// Thresholds that define "near-delta": the dominant component of a memorized
/// condition needs sigma <= sigma_max and weight >= weight_min.
struct MemorizedCriteria {
    double sigma_max = 0.02;
    double weight_min = 0.8;
};

/// Synthetic conditional data distribution. The null condition is the
/// prior-weighted union of all conditional mixtures. Immutable once built.
struct GmmWorld {
    int d = 0;
    std::vector<Condition> conditions;
    std::vector<double> prior;  // per-condition weight of the null mixture, sums to 1
    MemorizedCriteria criteria;

    int index_of(std::string_view id) const;  // -1 when absent
    const Condition& condition(std::string_view id) const;

    /// Index of the first condition flagged memorized, or -1.
    int memorized_index() const;

    /// Data-space (t=0) log density of the condition's mixture. Requires every
    /// component sigma > 0.
    double cond_log_density(const Vec& x, int cond_index) const;
    /// Data-space log density of the null mixture.
    double null_log_density(const Vec& x) const;

    /// Dominant means of all memorized conditions; the points duplicate hits
    /// are measured against.
    std::vector<Vec> duplicate_targets() const;
};

/// Validates and assembles a world. Prior may be empty (uniform) and is
/// normalized; component weights must already sum to 1 per condition.
GmmWorld build_gmm_world(int d, std::vector<Condition> conditions,
                         std::vector<double> prior = {},
                         MemorizedCriteria criteria = {});

/// The default study world: conditions on a ring, one memorized. The
/// memorized condition is a dominant near-delta plus a broad component at the
/// same center so that non-copied but nearby outputs still score reasonable
/// likelihood.
GmmWorld ring_world(int n_conditions = 4, double radius = 2.5, double sigma = 0.35,
                    double mem_sigma = 0.015, double mem_weight = 0.85,
                    double mem_broad_sigma = 0.45);

struct DatasetPoint {
    Vec x0;
    int cond_index = 0;
};

struct Dataset {
    std::vector<DatasetPoint> points;
    std::vector<std::size_t> duplicate_index;  // positions of exact duplicates
};

/// Draws n_per_condition points per condition; for each memorized condition
/// the draws are replaced with duplication_factor exact copies of the dominant
/// mean. Pure function of (world, counts, seed).
Dataset sample_dataset(const GmmWorld& world, int n_per_condition, int duplication_factor,
                       std::uint64_t seed);

}  // namespace basinlab
