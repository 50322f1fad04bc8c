#pragma once

#include <stdexcept>
#include <string>

namespace webswarm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DuplicateTaskId : public Error {
 public:
  explicit DuplicateTaskId(const std::string& id) : Error("duplicate task id: " + id) {}
};

class UnknownTask : public Error {
 public:
  explicit UnknownTask(const std::string& id) : Error("unknown task: " + id) {}
};

class MalformedMessage : public Error {
 public:
  using Error::Error;
};

class SourceUnavailable : public Error {
 public:
  using Error::Error;
};

class UnknownKernel : public Error {
 public:
  explicit UnknownKernel(const std::string& id) : Error("unknown kernel: " + id) {}
};

class KernelFailure : public Error {
 public:
  using Error::Error;
};

class BindFailure : public Error {
 public:
  using Error::Error;
};

class ServerUnreachable : public Error {
 public:
  using Error::Error;
};

}  // namespace webswarm
