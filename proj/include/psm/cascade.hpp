#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "psm/action_log.hpp"
#include "psm/error.hpp"
#include "psm/rational.hpp"

namespace psm {

struct Participant {
    std::string user_id;
    std::int64_t timestamp = 0;

    friend bool operator==(const Participant&, const Participant&) = default;
};

/// A deduplicated, time-ordered cascade: one entry per distinct user holding
/// that user's earliest action on the message. Canonical order is
/// (timestamp, user_id); all precedence logic compares timestamps strictly,
/// so equal-timestamp participants precede each other in neither direction.
struct Cascade {
    std::string message_id;
    std::vector<Participant> participants;
    bool viral = false;
    // Key users occupy a prefix of the canonical order (successor counts are
    // non-increasing along it), so a count suffices.
    std::size_t key_count = 0;

    std::size_t size() const { return participants.size(); }

    std::span<const Participant> key_users() const {
        return std::span<const Participant>(participants.data(), key_count);
    }

    bool is_key(std::string_view user) const {
        for (std::size_t i = 0; i < key_count; ++i)
            if (participants[i].user_id == user) return true;
        return false;
    }

    const Participant* find(std::string_view user) const {
        for (const auto& p : participants)
            if (p.user_id == user) return &p;
        return nullptr;
    }
};

/// All cascades of a log, sorted by message id, with the viral prior rho
/// kept as an exact count ratio.
struct CascadeSet {
    std::vector<Cascade> cascades;  // sorted by message_id
    std::uint32_t viral_threshold = 1;
    Rational phi;
    Rational rho;  // |viral| / |cascades|, exact

    const Cascade* find(std::string_view message_id) const {
        auto it = std::lower_bound(cascades.begin(), cascades.end(), message_id,
                                   [](const Cascade& c, std::string_view id) { return c.message_id < id; });
        if (it == cascades.end() || it->message_id != message_id) return nullptr;
        return &*it;
    }

    std::size_t viral_count() const {
        std::size_t n = 0;
        for (const auto& c : cascades) n += c.viral ? 1 : 0;
        return n;
    }
};

namespace detail {

// Number of participants with a strictly later timestamp, per participant.
// `sorted` must be in canonical (timestamp, user_id) order.
inline std::vector<std::size_t> successor_counts(const std::vector<Participant>& sorted) {
    const std::size_t n = sorted.size();
    std::vector<std::size_t> succ(n);
    std::size_t i = n;
    while (i > 0) {
        std::size_t hi = i;  // one past the last member of this timestamp group
        const std::int64_t t = sorted[hi - 1].timestamp;
        std::size_t lo = hi;
        while (lo > 0 && sorted[lo - 1].timestamp == t) --lo;
        for (std::size_t k = lo; k < hi; ++k) succ[k] = n - hi;
        i = lo;
    }
    return succ;
}

inline std::size_t key_prefix(const std::vector<Participant>& sorted, const Rational& phi) {
    const auto succ = successor_counts(sorted);
    const std::int64_t n = static_cast<std::int64_t>(sorted.size());
    std::size_t k = 0;
    while (k < sorted.size() && rational_times_le(phi, n, static_cast<std::int64_t>(succ[k]))) ++k;
    return k;
}

}  // namespace detail

/// Groups the log by message, keeps each user's earliest action, orders
/// participants canonically, and labels viral cascades and key users.
inline CascadeSet extract_cascades(const ActionLog& log, std::uint32_t viral_threshold,
                                   const Rational& phi) {
    if (viral_threshold < 1) throw ParamError("viral_threshold must be >= 1");
    if (!(phi > Rational(0, 1) && phi < Rational(1, 1)))
        throw ParamError("phi must lie in (0,1), got " + phi.str());

    CascadeSet set;
    set.viral_threshold = viral_threshold;
    set.phi = phi;
    set.cascades.reserve(log.message_index().size());

    for (const auto& [message_id, positions] : log.message_index()) {
        Cascade c;
        c.message_id = message_id;
        std::unordered_map<std::string_view, std::int64_t> earliest;
        earliest.reserve(positions.size());
        for (const std::uint32_t pos : positions) {
            const ActionRecord& rec = log.records()[pos];
            auto [it, inserted] = earliest.emplace(rec.user_id, rec.timestamp);
            if (!inserted && rec.timestamp < it->second) it->second = rec.timestamp;
        }
        c.participants.reserve(earliest.size());
        for (const auto& [user, t] : earliest)
            c.participants.push_back(Participant{std::string(user), t});
        std::sort(c.participants.begin(), c.participants.end(), [](const Participant& a, const Participant& b) {
            return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.user_id < b.user_id;
        });
        c.viral = c.participants.size() >= viral_threshold;
        c.key_count = detail::key_prefix(c.participants, phi);
        set.cascades.push_back(std::move(c));
    }
    std::sort(set.cascades.begin(), set.cascades.end(),
              [](const Cascade& a, const Cascade& b) { return a.message_id < b.message_id; });

    const std::int64_t viral = static_cast<std::int64_t>(set.viral_count());
    set.rho = set.cascades.empty() ? Rational(0, 1)
                                   : Rational(viral, static_cast<std::int64_t>(set.cascades.size()));
    return set;
}

/// The literal key-user predicate: |participants| * phi <= number of
/// participants with a strictly later timestamp.
inline bool key_user_check(const Cascade& cascade, std::string_view user, const Rational& phi) {
    const Participant* p = cascade.find(user);
    if (p == nullptr)
        throw DomainError("user '" + std::string(user) + "' is not a participant of cascade '" +
                          cascade.message_id + "'");
    std::int64_t succ = 0;
    for (const auto& other : cascade.participants)
        if (other.timestamp > p->timestamp) ++succ;
    return rational_times_le(phi, static_cast<std::int64_t>(cascade.size()), succ);
}

}  // namespace psm
