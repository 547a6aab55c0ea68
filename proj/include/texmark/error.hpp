#pragma once

#include <stdexcept>
#include <string>

namespace texmark {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside an operation's documented range.
class ParameterError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

// Unreadable or malformed input files.
class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Two artifacts built against different texton vocabularies.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

// Synthetic scene description that cannot be rendered.
class SpecError : public Error {
public:
    using Error::Error;
};

}  // namespace texmark
