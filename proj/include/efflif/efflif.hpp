#pragma once

#include "efflif/checkpoint.hpp"
#include "efflif/data.hpp"
#include "efflif/engine.hpp"
#include "efflif/error.hpp"
#include "efflif/gradcheck.hpp"
#include "efflif/hw_cost.hpp"
#include "efflif/lif.hpp"
#include "efflif/mem_model.hpp"
#include "efflif/memsave.hpp"
#include "efflif/network.hpp"
#include "efflif/sharing.hpp"
#include "efflif/spec_io.hpp"
#include "efflif/tensor.hpp"
#include "efflif/trainer.hpp"
