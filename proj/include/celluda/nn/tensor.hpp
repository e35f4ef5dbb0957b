#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>

namespace celluda::nn {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Feature map stored as channels x (height * width); each row is one
/// channel plane in row-major pixel order.
template <class Scalar>
struct Tensor
{
    int channels = 0;
    int height = 0;
    int width = 0;
    Matrix<Scalar> data;

    Tensor() = default;
    Tensor(int c, int h, int w) : channels(c), height(h), width(w), data(c, Eigen::Index(h) * w) {}
    Tensor(int c, int h, int w, Matrix<Scalar> d) : channels(c), height(h), width(w), data(std::move(d)) {}

    static Tensor zeros(int c, int h, int w)
    {
        Tensor t(c, h, w);
        t.data.setZero();
        return t;
    }

    Eigen::Index plane() const { return Eigen::Index(height) * width; }
};

/// Trainable parameter with its accumulated gradient.
template <class Scalar>
struct Param
{
    std::string name;
    Matrix<Scalar> value;
    Matrix<Scalar> grad;

    Param() = default;
    Param(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols))
    {}
};

} // namespace celluda::nn
