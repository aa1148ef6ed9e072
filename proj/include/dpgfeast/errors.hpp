#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpgfeast {

/// Base of every error raised by the library.
class error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class mesh_error : public error
{
public:
    using error::error;
};

class config_error : public error
{
public:
    using error::error;
};

/// A pivot of an LDL^H factorization was not strictly positive.
/// For DPG systems this means the shift is on (or numerically near) the
/// discrete spectrum, or the assembly is broken.
class non_positive_pivot : public error
{
public:
    non_positive_pivot(std::size_t row, double value)
        : error("non-positive pivot " + std::to_string(value) + " at row " + std::to_string(row))
        , row_(row)
        , value_(value)
    {}

    std::size_t row() const noexcept { return row_; }
    double value() const noexcept { return value_; }

private:
    std::size_t row_;
    double value_;
};

/// The mass matrix of a Ritz problem is numerically singular.
class rank_deficient_mass : public error
{
public:
    explicit rank_deficient_mass(std::size_t rank)
        : error("rank-deficient mass matrix, numerical rank " + std::to_string(rank))
        , rank_(rank)
    {}

    std::size_t rank() const noexcept { return rank_; }

private:
    std::size_t rank_;
};

class no_eigenvalues_in_contour : public error
{
public:
    no_eigenvalues_in_contour()
        : error("no eigenvalues in contour: the filtered subspace has no Ritz values inside")
    {}
};

class not_converged : public error
{
public:
    not_converged(int iterations, double last_change)
        : error("FEAST did not converge in " + std::to_string(iterations) +
                " iterations (last relative change " + std::to_string(last_change) + ")")
        , iterations_(iterations)
        , last_change_(last_change)
    {}

    int iterations() const noexcept { return iterations_; }
    double last_change() const noexcept { return last_change_; }

private:
    int iterations_;
    double last_change_;
};

} // namespace dpgfeast
