#pragma once

#include <stdexcept>
#include <string>

namespace lgnh {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad dimensions, out-of-range values, unreadable files.
class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InputError {
 public:
  explicit DimensionMismatch(const std::string& what) : InputError("dimension mismatch: " + what) {}
};

/// Stain separation found no optical-density variance.
class ConstantTile : public Error {
 public:
  ConstantTile() : Error("tile has no optical-density variance") {}
};

/// PQR fit on a patch with zero colour variance.
class DegeneratePatch : public Error {
 public:
  DegeneratePatch() : Error("patch has zero colour variance") {}
};

/// Saab fit retained no AC component.
class EmptyKernel : public Error {
 public:
  EmptyKernel() : Error("no principal component passed the energy threshold") {}
};

/// Pseudolabel lacks one of the two classes.
class DegeneratePseudolabel : public Error {
 public:
  DegeneratePseudolabel() : Error("pseudolabel contains a single class") {}
};

}  // namespace lgnh
