#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "psm/cascade.hpp"
#include "psm/error.hpp"
#include "psm/rational.hpp"

namespace psm {

/// Which users participate in the Eq.-style precedence counts.
enum class PairScope { all_participants, key_users };

inline PairScope pair_scope_from_string(std::string_view s) {
    if (s == "all") return PairScope::all_participants;
    if (s == "key_users") return PairScope::key_users;
    throw ParamError("unknown pair_scope: " + std::string(s) + " (expected all or key_users)");
}

enum class WeightScheme { uniform, viral_participant, viral_key };

inline WeightScheme weight_scheme_from_string(std::string_view s) {
    if (s == "uniform") return WeightScheme::uniform;
    if (s == "viral_participant") return WeightScheme::viral_participant;
    if (s == "viral_key") return WeightScheme::viral_key;
    throw ParamError("unknown weight_scheme: " + std::string(s));
}

/// Per-user cascade participation counters. p_{m|u} = n_viral_key / n_key.
struct UserViralStats {
    std::uint32_t n_casc = 0;        // cascades the user participates in
    std::uint32_t n_viral_casc = 0;  // viral cascades the user participates in
    std::uint32_t n_key = 0;         // cascades where the user is a key user
    std::uint32_t n_viral_key = 0;   // viral cascades where the user is a key user
};

/// Exact counts behind the pair probabilities of one related pair (i, j).
struct PairStats {
    std::uint32_t n_viral_precede = 0;  // viral cascades where i strictly precedes j
    std::uint32_t n_precede = 0;        // cascades where i strictly precedes j
    std::uint32_t n_viral_alone = 0;    // viral cascades with j but no earlier i
    std::uint32_t n_alone = 0;          // cascades with j but no earlier i
};

struct CausalityOptions {
    bool prima_facie = true;
    PairScope pair_scope = PairScope::all_participants;
    unsigned workers = 1;
};

namespace detail {

// Raw precedence counters per candidate pair. "any" counts let i be any
// participant (the Eq.-4 complement); "scoped" additionally requires i to
// satisfy the pair scope (equal under all_participants).
struct PairCounters {
    std::uint32_t pre_scoped = 0;
    std::uint32_t viral_pre_scoped = 0;
    std::uint32_t pre_any = 0;
    std::uint32_t viral_pre_any = 0;
};

struct IndexedCascade {
    bool viral = false;
    std::uint32_t key_count = 0;
    std::vector<std::uint32_t> users;  // canonical order
    std::vector<std::int64_t> times;
};

inline void run_parallel(std::size_t n_items, unsigned workers, const auto& fn) {
    if (workers <= 1 || n_items < 2) {
        fn(std::size_t{0}, n_items, 0u);
        return;
    }
    const unsigned w = static_cast<unsigned>(std::min<std::size_t>(workers, n_items));
    std::vector<std::thread> threads;
    threads.reserve(w);
    const std::size_t chunk = (n_items + w - 1) / w;
    for (unsigned k = 0; k < w; ++k) {
        const std::size_t lo = k * chunk;
        const std::size_t hi = std::min(n_items, lo + chunk);
        threads.emplace_back([&fn, lo, hi, k] { fn(lo, hi, k); });
    }
    for (auto& t : threads) t.join();
}

inline std::uint64_t pair_key(std::uint32_t i, std::uint32_t j) {
    return (static_cast<std::uint64_t>(i) << 32) | j;
}

}  // namespace detail

/// R(i), Q(j) and the pair counters, over a dense index of all participants.
/// Built once, immutable afterwards; all queries are lock-free reads.
class RelatedIndex {
  public:
    RelatedIndex(const CascadeSet& cascades, const CausalityOptions& opts) : opts_(opts), rho_(cascades.rho) {
        build_user_table(cascades);
        index_cascades(cascades);
        compute_user_stats();
        collect_candidate_pairs();
        count_pairs();
        build_adjacency();
        indexed_.clear();
        indexed_.shrink_to_fit();
    }

    std::size_t user_count() const { return users_.size(); }
    const std::vector<std::string>& users() const { return users_; }

    std::optional<std::uint32_t> find_user(std::string_view id) const {
        auto it = std::lower_bound(users_.begin(), users_.end(), id);
        if (it == users_.end() || *it != id) return std::nullopt;
        return static_cast<std::uint32_t>(it - users_.begin());
    }

    const UserViralStats& stats(std::uint32_t u) const { return stats_[u]; }
    const Rational& rho() const { return rho_; }
    const CausalityOptions& options() const { return opts_; }

    /// p_{m|u} > rho, compared exactly. False when the user was never key.
    bool exceeds_prior(std::uint32_t u) const {
        const auto& s = stats_[u];
        if (s.n_key == 0) return false;
        return Rational(s.n_viral_key, s.n_key) > rho_;
    }

    /// R(i): users j related after i, ascending by user id.
    std::span<const std::uint32_t> related(std::uint32_t i) const {
        return {adj_targets_.data() + r_offsets_[i], r_offsets_[i + 1] - r_offsets_[i]};
    }

    /// Q(j): users i with j in R(i), ascending by user id.
    std::span<const std::uint32_t> preceding(std::uint32_t j) const {
        return {q_sources_.data() + q_offsets_[j], q_offsets_[j + 1] - q_offsets_[j]};
    }

    /// Materialized Eq.-3/4 counts for j in R(i).
    PairStats pair_stats(std::uint32_t i, std::uint32_t j) const {
        const auto r = related(i);
        const auto it = std::lower_bound(r.begin(), r.end(), j);
        if (it == r.end() || *it != j)
            throw DomainError("pair_stats: user " + users_[j] + " is not in R(" + users_[i] + ")");
        const std::size_t slot = r_offsets_[i] + static_cast<std::size_t>(it - r.begin());
        const detail::PairCounters& c = adj_counts_[slot];
        const bool all = opts_.pair_scope == PairScope::all_participants;
        const auto& sj = stats_[j];
        const std::uint32_t scope_casc = all ? sj.n_casc : sj.n_key;
        const std::uint32_t viral_scope_casc = all ? sj.n_viral_casc : sj.n_viral_key;
        PairStats ps;
        ps.n_precede = c.pre_scoped;
        ps.n_viral_precede = c.viral_pre_scoped;
        ps.n_alone = scope_casc - c.pre_any;
        ps.n_viral_alone = viral_scope_casc - c.viral_pre_any;
        return ps;
    }

    // String-keyed conveniences, mainly for tests and small fixtures.
    std::vector<std::string> related_users(std::string_view i) const {
        return to_ids(related(require_user(i)));
    }
    std::vector<std::string> preceding_users(std::string_view j) const {
        return to_ids(preceding(require_user(j)));
    }
    PairStats pair_stats(std::string_view i, std::string_view j) const {
        return pair_stats(require_user(i), require_user(j));
    }

    std::uint32_t require_user(std::string_view id) const {
        const auto u = find_user(id);
        if (!u) throw DomainError("unknown user '" + std::string(id) + "'");
        return *u;
    }

  private:
    void build_user_table(const CascadeSet& set) {
        for (const auto& c : set.cascades)
            for (const auto& p : c.participants) users_.push_back(p.user_id);
        std::sort(users_.begin(), users_.end());
        users_.erase(std::unique(users_.begin(), users_.end()), users_.end());
    }

    void index_cascades(const CascadeSet& set) {
        indexed_.reserve(set.cascades.size());
        for (const auto& c : set.cascades) {
            detail::IndexedCascade ic;
            ic.viral = c.viral;
            ic.key_count = static_cast<std::uint32_t>(c.key_count);
            ic.users.reserve(c.size());
            ic.times.reserve(c.size());
            for (const auto& p : c.participants) {
                auto it = std::lower_bound(users_.begin(), users_.end(), p.user_id);
                ic.users.push_back(static_cast<std::uint32_t>(it - users_.begin()));
                ic.times.push_back(p.timestamp);
            }
            indexed_.push_back(std::move(ic));
        }
    }

    void compute_user_stats() {
        stats_.assign(users_.size(), UserViralStats{});
        for (const auto& ic : indexed_) {
            for (std::size_t k = 0; k < ic.users.size(); ++k) {
                auto& s = stats_[ic.users[k]];
                ++s.n_casc;
                if (ic.viral) ++s.n_viral_casc;
                if (k < ic.key_count) {
                    ++s.n_key;
                    if (ic.viral) ++s.n_viral_key;
                }
            }
        }
    }

    // Ordered pairs (i, j) that are m-related in some viral cascade: both key
    // users, i strictly earlier, and (when enabled) both prima facie causal.
    void collect_candidate_pairs() {
        std::vector<char> qualifies(users_.size(), 1);
        if (opts_.prima_facie) {
            for (std::uint32_t u = 0; u < users_.size(); ++u) qualifies[u] = exceeds_prior(u) ? 1 : 0;
        }
        std::vector<std::vector<std::uint64_t>> local(std::max(1u, opts_.workers));
        detail::run_parallel(indexed_.size(), opts_.workers, [&](std::size_t lo, std::size_t hi, unsigned w) {
            auto& out = local[w];
            for (std::size_t ci = lo; ci < hi; ++ci) {
                const auto& ic = indexed_[ci];
                if (!ic.viral) continue;
                for (std::uint32_t a = 0; a < ic.key_count; ++a) {
                    if (!qualifies[ic.users[a]]) continue;
                    for (std::uint32_t b = a + 1; b < ic.key_count; ++b) {
                        if (ic.times[a] >= ic.times[b]) continue;  // ties relate neither way
                        if (!qualifies[ic.users[b]]) continue;
                        out.push_back(detail::pair_key(ic.users[a], ic.users[b]));
                    }
                }
            }
        });
        std::size_t total = 0;
        for (const auto& v : local) total += v.size();
        candidate_keys_.reserve(total);
        for (auto& v : local) {
            candidate_keys_.insert(candidate_keys_.end(), v.begin(), v.end());
            v.clear();
            v.shrink_to_fit();
        }
        std::sort(candidate_keys_.begin(), candidate_keys_.end());
        candidate_keys_.erase(std::unique(candidate_keys_.begin(), candidate_keys_.end()),
                              candidate_keys_.end());
    }

    void count_pairs() {
        std::unordered_map<std::uint64_t, std::uint32_t> rank;
        rank.reserve(candidate_keys_.size() * 2);
        for (std::uint32_t r = 0; r < candidate_keys_.size(); ++r) rank.emplace(candidate_keys_[r], r);

        std::vector<char> i_side(users_.size(), 0), j_side(users_.size(), 0);
        for (const std::uint64_t key : candidate_keys_) {
            i_side[key >> 32] = 1;
            j_side[key & 0xffffffffu] = 1;
        }

        const bool all_scope = opts_.pair_scope == PairScope::all_participants;
        const unsigned workers = std::max(1u, opts_.workers);
        std::vector<std::vector<detail::PairCounters>> local(workers);
        detail::run_parallel(indexed_.size(), opts_.workers, [&](std::size_t lo, std::size_t hi, unsigned w) {
            auto& counts = local[w];
            counts.assign(candidate_keys_.size(), detail::PairCounters{});
            std::vector<std::uint32_t> is, js;
            for (std::size_t ci = lo; ci < hi; ++ci) {
                const auto& ic = indexed_[ci];
                is.clear();
                js.clear();
                const std::size_t n = ic.users.size();
                for (std::uint32_t k = 0; k < n; ++k) {
                    if (i_side[ic.users[k]]) is.push_back(k);
                    // j must satisfy the scope for either Eq.-3 or Eq.-4 counting
                    if (j_side[ic.users[k]] && (all_scope || k < ic.key_count)) js.push_back(k);
                }
                for (const std::uint32_t a : is) {
                    const bool a_scoped = all_scope || a < ic.key_count;
                    for (const std::uint32_t b : js) {
                        if (ic.times[a] >= ic.times[b]) continue;
                        const auto it = rank.find(detail::pair_key(ic.users[a], ic.users[b]));
                        if (it == rank.end()) continue;
                        auto& c = counts[it->second];
                        ++c.pre_any;
                        if (ic.viral) ++c.viral_pre_any;
                        if (a_scoped) {
                            ++c.pre_scoped;
                            if (ic.viral) ++c.viral_pre_scoped;
                        }
                    }
                }
            }
        });
        adj_counts_.assign(candidate_keys_.size(), detail::PairCounters{});
        for (const auto& counts : local) {
            if (counts.empty()) continue;
            for (std::size_t r = 0; r < counts.size(); ++r) {
                adj_counts_[r].pre_scoped += counts[r].pre_scoped;
                adj_counts_[r].viral_pre_scoped += counts[r].viral_pre_scoped;
                adj_counts_[r].pre_any += counts[r].pre_any;
                adj_counts_[r].viral_pre_any += counts[r].viral_pre_any;
            }
        }
    }

    void build_adjacency() {
        const std::size_t n = users_.size();
        r_offsets_.assign(n + 1, 0);
        adj_targets_.resize(candidate_keys_.size());
        // candidate_keys_ is sorted by (i, j) so the CSR rows come out sorted
        for (const std::uint64_t key : candidate_keys_) ++r_offsets_[(key >> 32) + 1];
        for (std::size_t u = 0; u < n; ++u) r_offsets_[u + 1] += r_offsets_[u];
        for (std::size_t s = 0; s < candidate_keys_.size(); ++s)
            adj_targets_[s] = static_cast<std::uint32_t>(candidate_keys_[s] & 0xffffffffu);

        q_offsets_.assign(n + 1, 0);
        q_sources_.resize(candidate_keys_.size());
        for (const std::uint64_t key : candidate_keys_) ++q_offsets_[(key & 0xffffffffu) + 1];
        for (std::size_t u = 0; u < n; ++u) q_offsets_[u + 1] += q_offsets_[u];
        std::vector<std::size_t> cursor(q_offsets_.begin(), q_offsets_.end() - 1);
        for (const std::uint64_t key : candidate_keys_) {
            const std::uint32_t i = static_cast<std::uint32_t>(key >> 32);
            const std::uint32_t j = static_cast<std::uint32_t>(key & 0xffffffffu);
            q_sources_[cursor[j]++] = i;  // i ascending per j, so rows stay sorted
        }
    }

    std::vector<std::string> to_ids(std::span<const std::uint32_t> idx) const {
        std::vector<std::string> out;
        out.reserve(idx.size());
        for (const std::uint32_t u : idx) out.push_back(users_[u]);
        return out;
    }

    CausalityOptions opts_;
    Rational rho_;
    std::vector<std::string> users_;  // sorted
    std::vector<UserViralStats> stats_;
    std::vector<detail::IndexedCascade> indexed_;  // cleared after build
    std::vector<std::uint64_t> candidate_keys_;    // sorted (i, j) pairs
    std::vector<detail::PairCounters> adj_counts_;
    std::vector<std::size_t> r_offsets_;
    std::vector<std::uint32_t> adj_targets_;
    std::vector<std::size_t> q_offsets_;
    std::vector<std::uint32_t> q_sources_;
};

inline RelatedIndex build_related_index(const CascadeSet& cascades, const CausalityOptions& opts = {}) {
    return RelatedIndex(cascades, opts);
}

/// All (user, message) pairs where the user is a prima facie causal user of
/// the message, sorted by (user, message).
inline std::vector<std::pair<std::string, std::string>> prima_facie_users(const CascadeSet& cascades) {
    CausalityOptions opts;
    opts.prima_facie = true;
    const RelatedIndex index(cascades, opts);
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& c : cascades.cascades) {
        if (!c.viral) continue;
        for (const auto& p : c.key_users()) {
            const auto u = index.find_user(p.user_id);
            if (u && index.exceeds_prior(*u)) out.emplace_back(p.user_id, c.message_id);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// (p_ij, p_not_ij) as plain doubles; the 0/0 convention makes both total.
inline std::pair<double, double> pair_probabilities(const PairStats& s) {
    const double p = s.n_precede == 0 ? 0.0 : static_cast<double>(s.n_viral_precede) / s.n_precede;
    const double pn = s.n_alone == 0 ? 0.0 : static_cast<double>(s.n_viral_alone) / s.n_alone;
    return {p, pn};
}

namespace detail {

// Exact sign of p_ij - p_not_ij via cross multiplication; the 0/0 convention
// maps an empty denominator to 0/1.
inline int compare_pair_probs(const PairStats& s) {
    const std::int64_t a = s.n_precede == 0 ? 0 : s.n_viral_precede;
    const std::int64_t b = s.n_precede == 0 ? 1 : s.n_precede;
    const std::int64_t c = s.n_alone == 0 ? 0 : s.n_viral_alone;
    const std::int64_t d = s.n_alone == 0 ? 1 : s.n_alone;
    const __int128 lhs = static_cast<__int128>(a) * d;
    const __int128 rhs = static_cast<__int128>(c) * b;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

}  // namespace detail

/// Kleinberg-Mishra causality: mean of p_ij - p_not_ij over R(i).
inline std::optional<double> eps_km(const RelatedIndex& index, std::uint32_t i) {
    const auto r = index.related(i);
    if (r.empty()) return std::nullopt;
    double sum = 0.0;
    for (const std::uint32_t j : r) {
        const auto [p, pn] = pair_probabilities(index.pair_stats(i, j));
        sum += p - pn;
    }
    return sum / static_cast<double>(r.size());
}

/// Relative likelihood causality: mean of the branched ratio score S(i,j).
/// alpha guards both ratio denominators; branch choice is exact on the counts.
inline std::optional<double> eps_rel(const RelatedIndex& index, std::uint32_t i, double alpha) {
    if (!(alpha > 0)) throw ParamError("alpha must be > 0");
    const auto r = index.related(i);
    if (r.empty()) return std::nullopt;
    double sum = 0.0;
    for (const std::uint32_t j : r) {
        const PairStats s = index.pair_stats(i, j);
        const auto [p, pn] = pair_probabilities(s);
        const int cmp = detail::compare_pair_probs(s);
        if (cmp > 0)
            sum += p / (pn + alpha) - 1.0;
        else if (cmp < 0)
            sum += 1.0 - pn / (p + alpha);
    }
    return sum / static_cast<double>(r.size());
}

/// Neighborhood causality: mean eps_km over Q(j).
inline std::optional<double> eps_nb(const RelatedIndex& index, std::uint32_t j,
                                    std::span<const std::optional<double>> km) {
    const auto q = index.preceding(j);
    if (q.empty()) return std::nullopt;
    double sum = 0.0;
    for (const std::uint32_t i : q) {
        if (!km[i]) throw InternalError("eps_km undefined for a member of Q(j)");
        sum += *km[i];
    }
    return sum / static_cast<double>(q.size());
}

/// Weighted neighborhood causality: weighted mean of eps_km over Q(j);
/// undefined when every weight is zero.
inline std::optional<double> eps_wnb(const RelatedIndex& index, std::uint32_t j,
                                     std::span<const std::optional<double>> km,
                                     std::span<const double> weights) {
    const auto q = index.preceding(j);
    if (q.empty()) return std::nullopt;
    double wsum = 0.0, sum = 0.0;
    for (const std::uint32_t i : q) {
        if (!km[i]) throw InternalError("eps_km undefined for a member of Q(j)");
        if (weights[i] < 0) throw ParamError("negative weight");
        wsum += weights[i];
        sum += weights[i] * *km[i];
    }
    if (wsum == 0.0) return std::nullopt;
    return sum / wsum;
}

struct ScoreConfig {
    double alpha = 1e-9;
    bool prima_facie = true;
    PairScope pair_scope = PairScope::all_participants;
    WeightScheme weight_scheme = WeightScheme::viral_participant;
    unsigned workers = 1;
};

struct ScoreEntry {
    std::string user_id;
    std::optional<double> eps_km, eps_rel, eps_nb, eps_wnb;
    std::uint32_t n_key = 0, n_viral_key = 0;
    double weight = 0.0;
};

/// Score table over every user that is a key user of at least one viral
/// cascade, sorted by user id.
struct CausalityScores {
    double alpha = 1e-9;
    std::vector<ScoreEntry> entries;

    const ScoreEntry* find(std::string_view user) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), user,
                                   [](const ScoreEntry& e, std::string_view u) { return e.user_id < u; });
        if (it == entries.end() || it->user_id != user) return nullptr;
        return &*it;
    }
};

inline double user_weight(const UserViralStats& s, WeightScheme scheme) {
    switch (scheme) {
        case WeightScheme::uniform: return 1.0;
        case WeightScheme::viral_participant: return static_cast<double>(s.n_viral_casc);
        case WeightScheme::viral_key: return static_cast<double>(s.n_viral_key);
    }
    throw InternalError("unhandled weight scheme");
}

/// Computes all four metrics for every scoreable user. Deterministic for any
/// worker count: integer counters merge exactly and each user's sums run in
/// a fixed order.
inline CausalityScores score_all(const CascadeSet& cascades, const ScoreConfig& config = {}) {
    if (!(config.alpha > 0)) throw ParamError("alpha must be > 0");
    CausalityOptions opts;
    opts.prima_facie = config.prima_facie;
    opts.pair_scope = config.pair_scope;
    opts.workers = config.workers;
    const RelatedIndex index(cascades, opts);

    const std::size_t n = index.user_count();
    std::vector<std::optional<double>> km(n), rel(n);
    std::vector<double> weights(n, 0.0);
    for (std::uint32_t u = 0; u < n; ++u) weights[u] = user_weight(index.stats(u), config.weight_scheme);

    detail::run_parallel(n, config.workers, [&](std::size_t lo, std::size_t hi, unsigned) {
        for (std::uint32_t u = static_cast<std::uint32_t>(lo); u < hi; ++u) {
            km[u] = eps_km(index, u);
            rel[u] = eps_rel(index, u, config.alpha);
        }
    });

    std::vector<std::optional<double>> nb(n), wnb(n);
    detail::run_parallel(n, config.workers, [&](std::size_t lo, std::size_t hi, unsigned) {
        for (std::uint32_t u = static_cast<std::uint32_t>(lo); u < hi; ++u) {
            nb[u] = eps_nb(index, u, km);
            wnb[u] = eps_wnb(index, u, km, weights);
        }
    });

    CausalityScores scores;
    scores.alpha = config.alpha;
    for (std::uint32_t u = 0; u < n; ++u) {
        const auto& s = index.stats(u);
        if (s.n_viral_key == 0) continue;
        ScoreEntry e;
        e.user_id = index.users()[u];
        e.eps_km = km[u];
        e.eps_rel = rel[u];
        e.eps_nb = nb[u];
        e.eps_wnb = wnb[u];
        e.n_key = s.n_key;
        e.n_viral_key = s.n_viral_key;
        e.weight = weights[u];
        scores.entries.push_back(std::move(e));
    }
    return scores;
}

}  // namespace psm
