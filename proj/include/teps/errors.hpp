#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace teps
{
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! Inconsistent or malformed input (dimensions, ids, ranges).
class ValidationError : public Error
{
  public:
    using Error::Error;
};

//! A numerical procedure cannot produce a meaningful answer.
class NumericalError : public Error
{
  public:
    using Error::Error;
};

//! A pipeline stage is missing an artifact produced by an earlier stage.
class DependencyError : public Error
{
  public:
    using Error::Error;
};

//! Relation set contains a preference cycle.
class CycleError : public ValidationError
{
  public:
    CycleError(std::string const& what, std::vector<int> cycle)
        : ValidationError(what), cycle_(std::move(cycle))
    {
    }

    std::vector<int> const& cycle() const { return cycle_; }

  private:
    std::vector<int> cycle_;
};

}  // namespace teps
