#include "motionlab/corpus.hpp"
