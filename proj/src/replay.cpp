#include "pxcl/replay.hpp"

#include <stdexcept>
#include <string>

namespace pxcl {

ClassBalancedBuffer::ClassBalancedBuffer(std::size_t total_capacity, std::size_t num_classes,
                                         std::uint64_t seed, EvictionPolicy policy)
    : per_class_(num_classes),
      seen_(num_classes, 0),
      per_class_capacity_(num_classes == 0 ? 0 : total_capacity / num_classes),
      policy_(policy),
      rng_(seed) {
    if (num_classes == 0) throw std::invalid_argument("ClassBalancedBuffer: num_classes must be positive");
    if (total_capacity < num_classes)
        throw std::invalid_argument("ClassBalancedBuffer: capacity " + std::to_string(total_capacity) +
                                    " is below num_classes " + std::to_string(num_classes));
}

void ClassBalancedBuffer::insert(const Sample& sample) {
    if (sample.label < 0 || static_cast<std::size_t>(sample.label) >= per_class_.size())
        throw std::invalid_argument("ClassBalancedBuffer: unknown label " + std::to_string(sample.label));
    auto& store = per_class_[static_cast<std::size_t>(sample.label)];
    auto& seen = seen_[static_cast<std::size_t>(sample.label)];
    seen += 1;
    if (store.size() < per_class_capacity_) {
        store.push_back(sample);
        return;
    }
    if (policy_ == EvictionPolicy::AlwaysReplace) {
        // The incoming sample always enters; a uniformly random victim leaves.
        store[rng_.below(store.size())] = sample;
    } else {
        // Reservoir variant: keep with probability K/seen.
        if (rng_.below(seen) < per_class_capacity_) store[rng_.below(store.size())] = sample;
    }
}

std::vector<Sample> ClassBalancedBuffer::sample(std::size_t n) {
    if (empty()) throw std::invalid_argument("ClassBalancedBuffer: cannot sample from an empty buffer");
    std::vector<Sample> picked;
    picked.reserve(n);

    const std::size_t per_class_quota = n / per_class_.size();
    for (const auto& store : per_class_) {
        if (store.empty()) continue;
        if (store.size() <= per_class_quota) {
            for (const Sample& s : store) picked.push_back(s);
            continue;
        }
        // Partial Fisher-Yates over indices: first quota entries are a uniform
        // draw without replacement.
        std::vector<std::size_t> idx(store.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = 0; i < per_class_quota; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng_.below(idx.size() - i));
            std::swap(idx[i], idx[j]);
            picked.push_back(store[idx[i]]);
        }
    }

    // Fill the remainder with replacement from the union of all stores.
    const std::size_t total = size();
    while (picked.size() < n) {
        std::size_t flat = static_cast<std::size_t>(rng_.below(total));
        for (const auto& store : per_class_) {
            if (flat < store.size()) {
                picked.push_back(store[flat]);
                break;
            }
            flat -= store.size();
        }
    }
    return picked;
}

std::size_t ClassBalancedBuffer::size() const {
    std::size_t total = 0;
    for (const auto& store : per_class_) total += store.size();
    return total;
}

void ClassBalancedBuffer::export_csv(std::ostream& out) const {
    out << "domain_id,label,source_index\n";
    for (const auto& store : per_class_)
        for (const Sample& s : store)
            out << s.domain_id << ',' << s.label << ',' << s.source_index << '\n';
}

ReservoirBuffer::ReservoirBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
    if (capacity == 0) throw std::invalid_argument("ReservoirBuffer: capacity must be positive");
    slots_.reserve(capacity);
}

void ReservoirBuffer::insert(const Sample& sample) {
    seen_ += 1;
    if (slots_.size() < capacity_) {
        slots_.push_back(sample);
        return;
    }
    // Keep with probability capacity/seen: draw a slot index over [0, seen)
    // and accept when it lands inside the reservoir.
    const std::uint64_t j = rng_.below(seen_);
    if (j < capacity_) slots_[static_cast<std::size_t>(j)] = sample;
}

std::vector<Sample> ReservoirBuffer::sample(std::size_t n) {
    if (slots_.empty()) throw std::invalid_argument("ReservoirBuffer: cannot sample from an empty buffer");
    std::vector<Sample> picked;
    picked.reserve(n);

    std::vector<std::size_t> idx(slots_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::size_t without_replacement = std::min(n, slots_.size());
    for (std::size_t i = 0; i < without_replacement; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng_.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        picked.push_back(slots_[idx[i]]);
    }
    while (picked.size() < n) picked.push_back(slots_[rng_.below(slots_.size())]);
    return picked;
}

void ReservoirBuffer::export_csv(std::ostream& out) const {
    out << "domain_id,label,source_index\n";
    for (const Sample& s : slots_) out << s.domain_id << ',' << s.label << ',' << s.source_index << '\n';
}

}  // namespace pxcl
