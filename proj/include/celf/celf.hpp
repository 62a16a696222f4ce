#ifndef CELF_CELF_HPP
#define CELF_CELF_HPP

#include "celf/config.hpp"
#include "celf/dataset.hpp"
#include "celf/error.hpp"
#include "celf/estimator.hpp"
#include "celf/evaluation.hpp"
#include "celf/field_export.hpp"
#include "celf/geometry.hpp"
#include "celf/model_io.hpp"
#include "celf/pathloss.hpp"
#include "celf/prior.hpp"
#include "celf/text.hpp"
#include "celf/timing.hpp"

#endif // CELF_CELF_HPP
