#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "podlim/errors.hpp"

namespace podlim {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Continuous-time realization x' = Ax + Bu, y = Cx + Du.
struct StateSpace {
  Mat A, B, C, D;
  std::vector<std::string> input_labels;
  std::vector<std::string> output_labels;

  StateSpace() = default;
  StateSpace(Mat a, Mat b, Mat c, Mat d, std::vector<std::string> in = {},
             std::vector<std::string> out = {})
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)),
        input_labels(std::move(in)), output_labels(std::move(out)) {
    if (input_labels.empty())
      for (Eigen::Index i = 0; i < B.cols(); ++i) input_labels.push_back("u" + std::to_string(i));
    if (output_labels.empty())
      for (Eigen::Index i = 0; i < C.rows(); ++i) output_labels.push_back("y" + std::to_string(i));
    validate();
  }

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }

  void validate() const {
    if (A.rows() != A.cols()) throw DimensionError("A must be square");
    if (B.rows() != A.rows()) throw DimensionError("B row count must equal the state dimension");
    if (C.cols() != A.rows()) throw DimensionError("C column count must equal the state dimension");
    if (D.rows() != C.rows() || D.cols() != B.cols())
      throw DimensionError("D must be p x m");
    if (static_cast<Eigen::Index>(input_labels.size()) != B.cols())
      throw DimensionError("input label count must equal m");
    if (static_cast<Eigen::Index>(output_labels.size()) != C.rows())
      throw DimensionError("output label count must equal p");
  }

  Eigen::Index input_index(const std::string& label) const {
    for (std::size_t i = 0; i < input_labels.size(); ++i)
      if (input_labels[i] == label) return static_cast<Eigen::Index>(i);
    throw DimensionError("no input labelled '" + label + "'");
  }
  Eigen::Index output_index(const std::string& label) const {
    for (std::size_t i = 0; i < output_labels.size(); ++i)
      if (output_labels[i] == label) return static_cast<Eigen::Index>(i);
    throw DimensionError("no output labelled '" + label + "'");
  }

  /// Keep the listed inputs and outputs, in the given order.
  StateSpace select(const std::vector<Eigen::Index>& ins, const std::vector<Eigen::Index>& outs) const {
    Mat b(n(), static_cast<Eigen::Index>(ins.size()));
    Mat c(static_cast<Eigen::Index>(outs.size()), n());
    Mat d(c.rows(), b.cols());
    std::vector<std::string> il, ol;
    for (std::size_t j = 0; j < ins.size(); ++j) {
      check_index(ins[j], m(), "input");
      b.col(static_cast<Eigen::Index>(j)) = B.col(ins[j]);
      il.push_back(input_labels[static_cast<std::size_t>(ins[j])]);
    }
    for (std::size_t i = 0; i < outs.size(); ++i) {
      check_index(outs[i], p(), "output");
      c.row(static_cast<Eigen::Index>(i)) = C.row(outs[i]);
      ol.push_back(output_labels[static_cast<std::size_t>(outs[i])]);
      for (std::size_t j = 0; j < ins.size(); ++j)
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = D(outs[i], ins[j]);
    }
    return {A, b, c, d, il, ol};
  }

  /// x -> T x similarity.
  StateSpace transformed(const Mat& T) const {
    const Mat Ti = T.inverse();
    return {T * A * Ti, T * B, C * Ti, D, input_labels, output_labels};
  }

  static void check_index(Eigen::Index i, Eigen::Index size, const char* what) {
    if (i < 0 || i >= size)
      throw DimensionError(std::string(what) + " index " + std::to_string(i) + " out of range [0," +
                           std::to_string(size) + ")");
  }
};

}  // namespace podlim
