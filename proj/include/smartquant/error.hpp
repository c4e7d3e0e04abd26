#pragma once

#include <stdexcept>
#include <string>

namespace sq {

// All precondition and format failures surface as sq::Error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sq
