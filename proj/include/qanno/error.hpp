#pragma once

#include <stdexcept>
#include <string>

namespace qanno {

// Input exceeds a documented size guard (e.g. Huffman over more than 20 items).
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Malformed input document. The message carries line/field diagnostics.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric value outside its admissible range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A guess that does not fit the state it is applied to.
class InvalidGuess : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InconsistentOracle : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Asked for a question on a state where everything is labeled.
class TerminalState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace qanno
