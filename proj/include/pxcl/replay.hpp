#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "pxcl/rng.hpp"

namespace pxcl {

// One training example: a 28x28 grayscale image in [0,1] with its class label,
// the domain it was drawn from, and its index within the source split.
struct Sample {
    std::vector<double> image;  // 784 pixels, row-major
    int label = 0;
    int domain_id = 0;
    std::int64_t source_index = 0;
};

// Eviction rule once a class store is full. AlwaysReplace keeps every incoming
// sample by evicting a uniformly random stored one; PerClassReservoir accepts
// the incoming sample with probability capacity/seen instead.
enum class EvictionPolicy { AlwaysReplace, PerClassReservoir };

// Replay memory partitioned per class with equal capacity K per class, so
// minority classes stay represented no matter how skewed the stream is.
class ClassBalancedBuffer {
public:
    // K = floor(total_capacity / num_classes). total_capacity must be >= num_classes.
    ClassBalancedBuffer(std::size_t total_capacity, std::size_t num_classes, std::uint64_t seed,
                        EvictionPolicy policy = EvictionPolicy::AlwaysReplace);

    void insert(const Sample& sample);

    // Draws the ReplaySet: floor(n / num_classes) uniformly without replacement
    // from each class store (all of a store that holds fewer), then fills the
    // remaining slots up to n with replacement from the union of all stores.
    std::vector<Sample> sample(std::size_t n);

    std::size_t per_class_capacity() const { return per_class_capacity_; }
    std::size_t num_classes() const { return per_class_.size(); }
    std::size_t size() const;
    bool empty() const { return size() == 0; }
    std::size_t class_size(std::size_t label) const { return per_class_.at(label).size(); }
    std::uint64_t seen(std::size_t label) const { return seen_.at(label); }
    const std::vector<Sample>& class_store(std::size_t label) const { return per_class_.at(label); }

    // Debug snapshot: CSV with columns domain_id, label, source_index.
    void export_csv(std::ostream& out) const;

private:
    std::vector<std::vector<Sample>> per_class_;
    std::vector<std::uint64_t> seen_;
    std::size_t per_class_capacity_;
    EvictionPolicy policy_;
    Rng rng_;
};

// Classical reservoir sampling buffer: a uniform random subset of the stream.
class ReservoirBuffer {
public:
    ReservoirBuffer(std::size_t capacity, std::uint64_t seed);

    void insert(const Sample& sample);

    // n uniform draws without replacement, with replacement once the slots are
    // exhausted. Class-agnostic.
    std::vector<Sample> sample(std::size_t n);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return slots_.size(); }
    bool empty() const { return slots_.empty(); }
    std::uint64_t seen() const { return seen_; }
    const std::vector<Sample>& slots() const { return slots_; }

    void export_csv(std::ostream& out) const;

private:
    std::vector<Sample> slots_;
    std::size_t capacity_;
    std::uint64_t seen_ = 0;
    Rng rng_;
};

}  // namespace pxcl
