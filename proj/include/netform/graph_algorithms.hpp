#ifndef NETFORM_GRAPH_ALGORITHMS_HPP
#define NETFORM_GRAPH_ALGORITHMS_HPP

#include <algorithm>
#include <climits>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "network.hpp"

namespace netform {

// label per player, labels numbered from 0 in discovery order
inline std::vector<int> connected_components(const Network& g)
{
    int n = g.size();
    std::vector<int> label(n, -1);
    int c = 0;
    std::vector<int> stack;
    for (int s = 0; s < n; ++s) {
        if (label[s] >= 0) continue;
        label[s] = c;
        stack.push_back(s);
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < n; ++v)
                if (label[v] < 0 && (g.has_link(u, v) || g.has_link(v, u))) {
                    label[v] = c;
                    stack.push_back(v);
                }
        }
        ++c;
    }
    return label;
}

// Kosaraju, iterative
inline std::vector<int> strong_components(const Network& g)
{
    int n = g.size();
    std::vector<int> order;
    order.reserve(n);
    std::vector<char> seen(n, 0);
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<std::pair<int, int>> st{{s, 0}};
        seen[s] = 1;
        while (!st.empty()) {
            auto& [u, next] = st.back();
            bool pushed = false;
            while (next < n) {
                int v = next++;
                if (!seen[v] && g.has_link(u, v)) {
                    seen[v] = 1;
                    st.push_back({v, 0});
                    pushed = true;
                    break;
                }
            }
            if (!pushed) {
                order.push_back(u);
                st.pop_back();
            }
        }
    }
    std::vector<int> label(n, -1);
    int c = 0;
    for (int idx = n - 1; idx >= 0; --idx) {
        int s = order[idx];
        if (label[s] >= 0) continue;
        std::vector<int> st{s};
        label[s] = c;
        while (!st.empty()) {
            int u = st.back();
            st.pop_back();
            for (int v = 0; v < n; ++v)
                if (label[v] < 0 && g.has_link(v, u)) {
                    label[v] = c;
                    st.push_back(v);
                }
        }
        ++c;
    }
    return label;
}

inline std::vector<int> largest_label_members(const std::vector<int>& label)
{
    if (label.empty()) return {};
    int k = *std::max_element(label.begin(), label.end()) + 1;
    std::vector<int> count(k, 0);
    for (int l : label) ++count[l];
    int best = int(std::max_element(count.begin(), count.end()) - count.begin());
    std::vector<int> members;
    for (int i = 0; i < int(label.size()); ++i)
        if (label[i] == best) members.push_back(i);
    return members;
}

// Stoer-Wagner global min cut of an undirected graph given as weight matrix
inline double stoer_wagner(std::vector<std::vector<double>> w)
{
    int n = int(w.size());
    if (n < 2) return 0.0;
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    while (n > 1) {
        std::vector<double> a(n, 0.0);
        std::vector<char> added(n, 0);
        int prev = -1, last = -1;
        for (int it = 0; it < n; ++it) {
            int sel = -1;
            for (int i = 0; i < n; ++i)
                if (!added[i] && (sel < 0 || a[i] > a[sel])) sel = i;
            added[sel] = 1;
            prev = last;
            last = sel;
            if (it == n - 1) {
                best = std::min(best, a[sel]);
                // merge last into prev
                for (int i = 0; i < n; ++i) {
                    w[v[prev]][v[i]] += w[v[last]][v[i]];
                    w[v[i]][v[prev]] = w[v[prev]][v[i]];
                }
                v.erase(v.begin() + last);
                break;
            }
            for (int i = 0; i < n; ++i)
                if (!added[i]) a[i] += w[v[sel]][v[i]];
        }
        --n;
    }
    return best;
}

namespace detail {

// unit-capacity max flow, stopping once the flow reaches cap
class UnitFlow {
public:
    explicit UnitFlow(const Network& g) : n_(g.size()), head_(n_, -1)
    {
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                if (g.has_link(i, j)) {
                    add(i, j, 1);
                    add(j, i, 0);
                }
        cap0_ = cap_;
    }

    int flow(int s, int t, int limit)
    {
        cap_ = cap0_;
        int f = 0;
        std::vector<int> pe(n_);
        while (f < limit) {
            std::fill(pe.begin(), pe.end(), -1);
            std::deque<int> q{s};
            pe[s] = -2;
            while (!q.empty() && pe[t] == -1) {
                int u = q.front();
                q.pop_front();
                for (int e = head_[u]; e >= 0; e = next_[e])
                    if (cap_[e] > 0 && pe[to_[e]] == -1) {
                        pe[to_[e]] = e;
                        q.push_back(to_[e]);
                    }
            }
            if (pe[t] == -1) break;
            for (int v = t; v != s; v = to_[pe[v] ^ 1]) {
                --cap_[pe[v]];
                ++cap_[pe[v] ^ 1];
            }
            ++f;
        }
        return f;
    }

private:
    void add(int u, int v, int c)
    {
        to_.push_back(v);
        cap_.push_back(c);
        next_.push_back(head_[u]);
        head_[u] = int(to_.size()) - 1;
    }
    int n_;
    std::vector<int> head_, to_, cap_, next_, cap0_;
};

} // namespace detail

// Minimum number of arcs whose removal destroys strong connectivity; 0 when
// the digraph is not strongly connected.
inline int directed_edge_connectivity(const Network& g)
{
    int n = g.size();
    if (n < 2) return 0;
    auto scc = strong_components(g);
    if (*std::max_element(scc.begin(), scc.end()) > 0) return 0;
    auto deg = degree_sequence(g);
    int best = std::min(*std::min_element(deg.out.begin(), deg.out.end()),
                        *std::min_element(deg.in.begin(), deg.in.end()));
    detail::UnitFlow uf(g);
    for (int v = 1; v < n && best > 0; ++v) {
        best = std::min(best, uf.flow(0, v, best));
        best = std::min(best, uf.flow(v, 0, best));
    }
    return best;
}

struct NetworkSummary {
    int n = 0;
    bool directed = false;
    double density = 0;
    double in_mean = 0, in_median = 0;
    double out_mean = 0, out_median = 0;
    double comp_share = 0;
    double min_cut = 0;
    double clustering = 0;
};

inline double median_of(std::vector<int> v)
{
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// 3 * triangles / connected triples of the undirected skeleton
inline double global_clustering(const Network& g)
{
    Network s = g.directed() ? g.skeleton() : g;
    double tri = double(count_transitive_triangles(s));
    double triples = 0;
    for (int i = 0; i < s.size(); ++i) {
        double d = s.out_degree(i);
        triples += d * (d - 1) / 2;
    }
    return triples > 0 ? 3.0 * tri / triples : 0.0;
}

// Directed networks: strong components and arc connectivity; undirected:
// connected components and Stoer-Wagner (0 when disconnected).
inline NetworkSummary summary_stats(const Network& g)
{
    int n = g.size();
    if (n < 2) throw DegenerateInput("summary statistics need at least two players");
    NetworkSummary s;
    s.n = n;
    s.directed = g.directed();
    double pairs = g.directed() ? double(n) * (n - 1) : double(n) * (n - 1) / 2;
    s.density = double(g.link_count()) / pairs;
    auto deg = degree_sequence(g);
    s.out_mean = std::accumulate(deg.out.begin(), deg.out.end(), 0.0) / n;
    s.in_mean = std::accumulate(deg.in.begin(), deg.in.end(), 0.0) / n;
    s.out_median = median_of(deg.out);
    s.in_median = median_of(deg.in);

    auto label = g.directed() ? strong_components(g) : connected_components(g);
    auto big = largest_label_members(label);
    s.comp_share = double(big.size()) / n;

    if (g.directed()) {
        s.min_cut = directed_edge_connectivity(g);
    } else if (int(big.size()) == n) {
        std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (g.has_link(i, j)) w[i][j] = 1.0;
        s.min_cut = stoer_wagner(std::move(w));
    } else {
        s.min_cut = 0.0;
    }
    s.clustering = global_clustering(g);
    return s;
}

inline std::string summary_csv_header()
{
    return "n,directed,density,in_mean,in_median,out_mean,out_median,comp_share,min_cut,clustering";
}

inline std::string summary_csv_row(const NetworkSummary& s)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, "%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", s.n, s.directed ? 1 : 0,
                  s.density, s.in_mean, s.in_median, s.out_mean, s.out_median, s.comp_share, s.min_cut,
                  s.clustering);
    return buf;
}

} // namespace netform

#endif
