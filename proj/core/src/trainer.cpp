// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
