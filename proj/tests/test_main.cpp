/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
