#ifndef FEEDKAL_FEEDKAL_HPP
#define FEEDKAL_FEEDKAL_HPP

#include "feedkal/filter_ss.hpp"
#include "feedkal/filter_tv.hpp"
#include "feedkal/gaussian.hpp"
#include "feedkal/linalg.hpp"
#include "feedkal/model.hpp"
#include "feedkal/sim.hpp"

#endif  // FEEDKAL_FEEDKAL_HPP
