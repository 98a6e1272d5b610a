#ifndef NETFORM_NETWORK_HPP
#define NETFORM_NETWORK_HPP

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <regex>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace netform {

// Dense bit-matrix adjacency. Row i holds the out-links of i; undirected
// networks keep both triangles in sync.
class Network {
public:
    Network() = default;
    Network(int n, bool directed) : n_(n), directed_(directed), words_((n + 63) / 64)
    {
        if (n < 0) throw DomainError("negative player count");
        bits_.assign(static_cast<std::size_t>(n_) * words_, 0);
    }

    int size() const { return n_; }
    bool directed() const { return directed_; }
    int words() const { return words_; }

    bool has_link(int i, int j) const
    {
        return (bits_[idx(i, j >> 6)] >> (j & 63)) & 1u;
    }

    void set_link(int i, int j, bool on = true)
    {
        if (i < 0 || j < 0 || i >= n_ || j >= n_) throw DomainError("player index out of range");
        if (i == j) throw DomainError("self-link at player " + std::to_string(i + 1));
        put(i, j, on);
        if (!directed_) put(j, i, on);
    }

    std::span<const std::uint64_t> row(int i) const
    {
        return {bits_.data() + static_cast<std::size_t>(i) * words_, static_cast<std::size_t>(words_)};
    }

    int out_degree(int i) const
    {
        int d = 0;
        for (auto w : row(i)) d += std::popcount(w);
        return d;
    }

    // directed: number of ordered links; undirected: number of unordered links
    long long link_count() const
    {
        long long c = 0;
        for (auto w : bits_) c += std::popcount(w);
        return directed_ ? c : c / 2;
    }

    // sum_k G_ik G_jk over out-neighbourhoods
    int common_neighbors(int i, int j) const
    {
        auto a = row(i), b = row(j);
        int c = 0;
        for (int w = 0; w < words_; ++w) c += std::popcount(a[w] & b[w]);
        return c;
    }

    Network skeleton() const
    {
        Network s(n_, false);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                if (has_link(i, j)) {
                    s.put(i, j, true);
                    s.put(j, i, true);
                }
        return s;
    }

    Eigen::MatrixXd adjacency() const
    {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                if (has_link(i, j)) a(i, j) = 1.0;
        return a;
    }

    static Network from_adjacency(const Eigen::MatrixXd& a, bool directed)
    {
        Network g(static_cast<int>(a.rows()), directed);
        for (int i = 0; i < g.n_; ++i)
            for (int j = 0; j < g.n_; ++j)
                if (i != j && a(i, j) != 0.0) g.set_link(i, j);
        return g;
    }

    bool operator==(const Network& o) const
    {
        return n_ == o.n_ && directed_ == o.directed_ && bits_ == o.bits_;
    }

private:
    std::size_t idx(int i, int w) const { return static_cast<std::size_t>(i) * words_ + w; }
    void put(int i, int j, bool on)
    {
        std::uint64_t m = std::uint64_t{1} << (j & 63);
        if (on)
            bits_[idx(i, j >> 6)] |= m;
        else
            bits_[idx(i, j >> 6)] &= ~m;
    }

    int n_ = 0;
    bool directed_ = false;
    int words_ = 0;
    std::vector<std::uint64_t> bits_;
};

struct DegreeSequence {
    std::vector<int> out;
    std::vector<int> in;   // equals out for undirected networks
};

inline DegreeSequence degree_sequence(const Network& g)
{
    DegreeSequence d;
    int n = g.size();
    d.out.resize(n);
    d.in.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        d.out[i] = g.out_degree(i);
        for (int j = 0; j < n; ++j)
            if (g.has_link(i, j)) ++d.in[j];
    }
    return d;
}

// Undirected: unordered triples with all three links. Directed: ordered
// triples (i,j,k) with ij, ik and jk present.
inline long long count_transitive_triangles(const Network& g)
{
    int n = g.size();
    long long s = 0;
    if (g.directed()) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (g.has_link(i, j)) s += g.common_neighbors(i, j);
        return s;
    }
    std::vector<std::uint64_t> mask(g.words());
    for (int i = 0; i < n; ++i) {
        auto ri = g.row(i);
        for (int j = i + 1; j < n; ++j) {
            if (!g.has_link(i, j)) continue;
            auto rj = g.row(j);
            // only k > j
            for (int w = 0; w < g.words(); ++w) {
                std::uint64_t m = ~std::uint64_t{0};
                int lo = w * 64;
                if (lo + 63 <= j)
                    m = 0;
                else if (lo <= j)
                    m = ~std::uint64_t{0} << (j - lo + 1);
                s += std::popcount(ri[w] & rj[w] & m);
            }
        }
    }
    return s;
}

inline void write_edge_list(const Network& g, std::ostream& out)
{
    out << "# n=" << g.size() << " directed=" << (g.directed() ? 1 : 0) << "\n";
    for (int i = 0; i < g.size(); ++i)
        for (int j = g.directed() ? 0 : i + 1; j < g.size(); ++j)
            if (g.has_link(i, j)) out << i + 1 << "," << j + 1 << "\n";
}

inline Network read_edge_list(std::istream& in)
{
    static const std::regex header(R"(^\s*#?\s*n\s*=\s*(\d+)\s+directed\s*=\s*(0|1|true|false)\s*$)");
    static const std::regex edge(R"(^\s*(-?\d+)\s*,\s*(-?\d+)\s*$)");
    std::string line;
    int row = 0;
    Network g;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::smatch m;
        if (!have_header) {
            if (!std::regex_match(line, m, header))
                throw ParseError("row " + std::to_string(row) + ": expected header 'n=<int> directed=<0|1>'", row);
            bool dir = m[2] == "1" || m[2] == "true";
            g = Network(std::stoi(m[1]), dir);
            have_header = true;
            continue;
        }
        if (line[line.find_first_not_of(" \t")] == '#') continue;
        if (!std::regex_match(line, m, edge))
            throw ParseError("row " + std::to_string(row) + ": malformed edge '" + line + "'", row);
        long long a = std::stoll(m[1]), b = std::stoll(m[2]);
        if (a < 1 || b < 1 || a > g.size() || b > g.size())
            throw ParseError("row " + std::to_string(row) + ": index out of range in '" + line + "'", row);
        if (a == b) throw ParseError("row " + std::to_string(row) + ": self-loop '" + line + "'", row);
        if (g.has_link(int(a - 1), int(b - 1)))
            throw ParseError("row " + std::to_string(row) + ": duplicate edge '" + line + "'", row);
        g.set_link(int(a - 1), int(b - 1));
    }
    if (!have_header) throw ParseError("missing header", row);
    return g;
}

} // namespace netform

#endif
