#pragma once

#include "dialogsep/audio.hpp"
#include "dialogsep/dataset.hpp"
#include "dialogsep/error.hpp"
#include "dialogsep/fft.hpp"
#include "dialogsep/filters.hpp"
#include "dialogsep/irm.hpp"
#include "dialogsep/loudness.hpp"
#include "dialogsep/metrics.hpp"
#include "dialogsep/mushra.hpp"
#include "dialogsep/random.hpp"
#include "dialogsep/remix.hpp"
#include "dialogsep/schedule.hpp"
#include "dialogsep/stft.hpp"
#include "dialogsep/wav.hpp"
