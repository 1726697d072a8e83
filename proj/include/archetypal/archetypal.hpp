#pragma once

// Solver library umbrella. File I/O lives separately in archetypal/io.hpp
// (it pulls in OpenSSL for input digests).

#include "archetypal/active_set.hpp"
#include "archetypal/core.hpp"
#include "archetypal/evaluation.hpp"
#include "archetypal/fit.hpp"
#include "archetypal/fit_common.hpp"
#include "archetypal/likelihood.hpp"
#include "archetypal/pcha.hpp"
#include "archetypal/reference_qp.hpp"
#include "archetypal/smo.hpp"
#include "archetypal/synthetic.hpp"
