#pragma once

namespace ungan::testing {

// {mse, ssim, psnr} for metric_fixture(k), from tests/oracles/metrics_oracle.py.
inline constexpr double kMetricOracle[20][3] = {
    {0.00020000600367175441, 0.9916015924912146, 36.989569677241164},
    {0.00045045276982556902, 0.98138361092841919, 33.463507382685656},
    {0.00079997517477623404, 0.9453157897623653, 30.969234900392809},
    {0.0012493249956426913, 0.94853964266101176, 29.033245708698132},
    {0.0017999530208995841, 0.88501233608345597, 27.447388299135444},
    {0.002461405260166691, 0.81949403631410911, 26.088168756249853},
    {0.0032002031791413142, 0.81009034791448786, 24.94822447686747},
    {0.0040522043386598261, 0.75781120273192626, 23.923086627898272},
    {0.0049998884133790784, 0.7865395073300292, 23.010396880628797},
    {0.0060357168113686303, 0.63680031234735346, 22.192711449973601},
    {0.0072000898598033464, 0.80601815511536345, 21.426620833780081},
    {0.0084532260633176041, 0.57207021446499207, 20.729775165988663},
    {0.0098003198391175186, 0.7688558120280391, 20.087597506241174},
    {0.011205357149664695, 0.70422469155444423, 19.505742965892793},
    {0.012793969043924621, 0.71902617671559177, 18.929947044289129},
    {0.014435360454516566, 0.59916401091482918, 18.405723672073659},
    {0.016157318929713792, 0.58795950478747305, 17.916307023876055},
    {0.017987241942484196, 0.56451257247338982, 17.450354237021244},
    {0.019943654130101414, 0.42484134496188353, 17.001952661273727},
    {0.15006870489375648, -0.75043645974274842, 8.2370986544498805},
};

}  // namespace ungan::testing
