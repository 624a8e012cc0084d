#pragma once

#include "eigenet/acoustics/losses.hpp"
#include "eigenet/acoustics/metrics.hpp"
#include "eigenet/acoustics/spectra.hpp"
#include "eigenet/codec/codec.hpp"
#include "eigenet/codec/pretrain.hpp"
#include "eigenet/dataset/io.hpp"
#include "eigenet/dataset/sampling.hpp"
#include "eigenet/model/eigenet.hpp"
#include "eigenet/nn/checkpoint.hpp"
#include "eigenet/nn/gradcheck.hpp"
#include "eigenet/simulator/ism.hpp"
#include "eigenet/simulator/scene_sampler.hpp"
#include "eigenet/trainer/ablation.hpp"
#include "eigenet/trainer/evaluate.hpp"
#include "eigenet/trainer/report.hpp"
#include "eigenet/trainer/train.hpp"
