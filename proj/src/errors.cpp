#include "mixvol/errors.hpp"

namespace mixvol {

void fail_input(const std::string& what) { throw InputError(what); }

void require(bool cond, const std::string& what) {
    if (!cond) throw InputError(what);
}

} // namespace mixvol
