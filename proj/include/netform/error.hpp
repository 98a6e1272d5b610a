#ifndef NETFORM_ERROR_HPP
#define NETFORM_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace netform {

class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error("domain", w) {}
};

struct DegenerateInput : Error {
    explicit DegenerateInput(const std::string& w) : Error("degenerate_input", w) {}
};

struct ParseError : Error {
    ParseError(const std::string& w, int row) : Error("parse", w), row(row) {}
    int row;
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error("io", w) {}
};

struct StructuralError : Error {
    explicit StructuralError(const std::string& w) : Error("structural", w) {}
};

struct SingularityError : Error {
    explicit SingularityError(const std::string& w) : Error("singular", w) {}
};

struct ContractionViolation : Error {
    ContractionViolation(const std::string& w, double norm, double bound)
        : Error("contraction_violation", w), norm(norm), bound(bound) {}
    double norm;
    double bound;
};

struct NoConvergence : Error {
    NoConvergence(const std::string& w, int iters) : Error("no_convergence", w), iterations(iters) {}
    int iterations;
};

struct ScaleError : Error {
    explicit ScaleError(const std::string& w) : Error("scale", w) {}
};

// players whose degree puts the heterogeneity MLE at +-infinity
struct Nonexistence : Error {
    Nonexistence(const std::string& w, std::vector<int> players)
        : Error("nonexistence", w), players(std::move(players)) {}
    std::vector<int> players;
};

struct IdentificationFailure : Error {
    explicit IdentificationFailure(const std::string& w) : Error("identification", w) {}
};

struct IllConditioned : Error {
    IllConditioned(const std::string& w, double lambda_min)
        : Error("ill_conditioned", w), lambda_min(lambda_min) {}
    double lambda_min;
};

struct NonContraction : Error {
    NonContraction(const std::string& w, int sweeps) : Error("non_contraction", w), sweeps(sweeps) {}
    int sweeps;
};

} // namespace netform

#endif
