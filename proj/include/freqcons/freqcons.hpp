#pragma once

#include "freqcons/errors.hpp"
#include "freqcons/grid.hpp"
#include "freqcons/fft.hpp"
#include "freqcons/spectral.hpp"
#include "freqcons/tfc.hpp"
#include "freqcons/wtfr.hpp"
#include "freqcons/ffc.hpp"
#include "freqcons/metrics.hpp"
#include "freqcons/sequence.hpp"
