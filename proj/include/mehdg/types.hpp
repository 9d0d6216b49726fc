#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mehdg
{

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied an argument outside the documented domain.
class InvalidArgument : public Error
{
  public:
    using Error::Error;
};

class DegenerateGeometry : public Error
{
  public:
    using Error::Error;
};

/// LU factorization of a macro-element block A hit a vanishing pivot.
class SingularLocalBlock : public Error
{
  public:
    explicit SingularLocalBlock(int macro)
        : Error("singular local block on macro-element " + std::to_string(macro)), macro_id(macro)
    {
    }
    int macro_id;
};

/// No symmetric or LU factorization of a face block D succeeded.
class SingularFaceBlock : public Error
{
  public:
    explicit SingularFaceBlock(int face)
        : Error("singular face block on skeleton face " + std::to_string(face)), face_id(face)
    {
    }
    int face_id;
};

} // namespace mehdg
