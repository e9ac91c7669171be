#pragma once

#include "ssqlab/common.hpp"
#include "ssqlab/fft.hpp"
#include "ssqlab/signal_model.hpp"
#include "ssqlab/windows_wavelets.hpp"
#include "ssqlab/linear_tfr.hpp"
#include "ssqlab/synchrosqueeze.hpp"
#include "ssqlab/ridge_reconstruct.hpp"
#include "ssqlab/metrics.hpp"
#include "ssqlab/io.hpp"
#include "ssqlab/pipeline.hpp"
