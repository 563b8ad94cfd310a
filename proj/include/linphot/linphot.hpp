#pragma once

#include "linphot/calibration.hpp"
#include "linphot/detector_model.hpp"
#include "linphot/ensemble_io.hpp"
#include "linphot/error.hpp"
#include "linphot/json_io.hpp"
#include "linphot/loss_channel.hpp"
#include "linphot/photon_sources.hpp"
#include "linphot/random.hpp"
#include "linphot/reconstruction.hpp"
#include "linphot/run_config.hpp"
#include "linphot/runner.hpp"
#include "linphot/stat_engine.hpp"
#include "linphot/summation.hpp"
