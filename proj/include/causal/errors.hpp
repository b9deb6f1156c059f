#pragma once

#include <stdexcept>
#include <string>

namespace causal {

// Base class for all library errors. CLI maps these to exit code 1.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Query text could not be parsed. Carries 1-based line/column.
struct ParseError : Error {
    int line = 0;
    int column = 0;
    ParseError(const std::string& msg, int line_, int col_)
        : Error(msg + " (line " + std::to_string(line_) + ", column " + std::to_string(col_) + ")"),
          line(line_), column(col_) {}
};

// Data files could not be loaded or are inconsistent.
struct LoadError : Error {
    using Error::Error;
};

// Why-So was asked about a tuple combination that is not an answer.
struct NotAnAnswerError : Error {
    using Error::Error;
};

// Why-No was asked about a tuple combination that is an answer.
struct IsAnAnswerError : Error {
    using Error::Error;
};

// An operation's precondition does not hold for this input (e.g. the flow
// solver on a query that is not weakly linear).
struct NotApplicableError : Error {
    using Error::Error;
};

// A configurable search budget was exhausted before an exact answer was found.
struct ResourceLimitError : Error {
    using Error::Error;
};

// Internal consistency failure of the classifier: a final query that is not
// canonically isomorphic to a hard core. Never a silent verdict.
struct ClassifierBugError : Error {
    using Error::Error;
};

}  // namespace causal
