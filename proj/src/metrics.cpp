#include "motionlab/metrics.hpp"
