#pragma once

#include <stdexcept>
#include <string>

namespace fcndepth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or parameter extents do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed weight container, depth raster or image file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Raised by inference when a layer fails; carries the offending layer name.
class LayerError : public Error {
 public:
  LayerError(std::string layer, const std::string& what)
      : Error("layer '" + layer + "': " + what), layer_(std::move(layer)) {}

  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

class MissingWeightError : public LayerError {
 public:
  MissingWeightError(std::string layer, const std::string& entry)
      : LayerError(std::move(layer), "missing weight entry '" + entry + "'"),
        entry_(entry) {}

  const std::string& entry() const noexcept { return entry_; }

 private:
  std::string entry_;
};

}  // namespace fcndepth
