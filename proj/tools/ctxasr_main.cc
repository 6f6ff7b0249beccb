// tools/ctxasr_main.cc
//
// Copyright (c)  2026  ctxasr authors

#include "ctxasr/pipeline.h"

int main(int argc, char** argv) { return ctxasr::RunCli(argc, argv); }
