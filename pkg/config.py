import math


class Config:
    """Shipped defaults for the tactile sliding simulator"""

    # Scenario file
    SCENARIO_VERSION = 1
    DEFAULT_SEED = 0
    DEFAULT_OUT_DIR = 'out'

    # Tactile image geometry used for datasets
    IMAGE_WIDTH_PX = 304
    IMAGE_HEIGHT_PX = 256
    MM_PER_PX = 0.0625

    # Sensor footprint (mm); the image covers exactly the footprint
    FOOTPRINT_WIDTH_MM = IMAGE_WIDTH_PX * MM_PER_PX
    FOOTPRINT_HEIGHT_MM = IMAGE_HEIGHT_PX * MM_PER_PX

    # Renderer intensities
    CONTACT_INTENSITY = 0.7
    BACKGROUND_INTENSITY = 0.1
    CONTACT_SOFTNESS_MM = 0.5
    TEXTURE_PERIOD_MM = 1.0
    DOT_RADIUS_MM = 0.25
    SEQUENCE_LENGTH = 5
    FRAME_JITTER_MM = 0.5

    # Cloth generation
    CLOTH_WIDTH_MM = 300.0
    CLOTH_HEIGHT_MM = 300.0
    CLOTH_NOISE_MM = 0.5
    CLOTH_VERTEX_SPACING_MM = 2.5
    CLOTH_MAX_SEGMENT_MM = 5.0
    CRUMPLE_WAVE_MM = 4.0
    CRUMPLE_FOLD_DEPTH_MM = 16.0
    CRUMPLE_FOLD_WIDTH_MM = 12.0
    CRUMPLE_MAX_RETRIES = 10

    # Metrics
    SSIM_C1 = 0.01 ** 2
    SSIM_C2 = 0.03 ** 2
    SSIM_WINDOW_PX = 11
    IMAGE_LOSS_ALPHA = 0.5
    POSE_LAMBDA1 = 1.0
    POSE_LAMBDA2 = 1.0

    # Perception
    FEATURE_SMOOTHING_MM = 0.3
    GRADIENT_SMOOTHING_MM = 0.5
    CLASSIFIER_EPOCHS = 400
    CLASSIFIER_LEARNING_RATE = 0.5
    CLASSIFIER_L2 = 1e-4
    REGRESSOR_RIDGE = 1e-6
    REGRESSOR_MIN_SAMPLES = 50
    VALIDATION_FRACTION = 0.2

    # Inner PID loops. The PID output is the actuator's position target: with
    # P only a loop settles at kp/(1+kp) of the setpoint, and the integral
    # closes the rest through a slow mode near ki/(1+kp) per second. The loops
    # run at SERVO_RATE_HZ, sub-stepping each control tick.
    SERVO_RATE_HZ = 200.0

    # Grasp-depth PID
    GRASP_KP = 4.0
    GRASP_KI = 0.5
    GRASP_KD = 0.2
    GRASP_ALPHA = 0.3
    GRASP_EFFORT_LIMIT_MM = 40.0

    # Abduction PID
    ABDUCTION_KP = 3.0
    ABDUCTION_KI = 0.2
    ABDUCTION_KD = 0.1
    ABDUCTION_ALPHA = 0.3

    # Edge alignment PD
    ALIGN_KPY = 0.8          # deg/mm
    ALIGN_KDY = 0.05         # deg*s/mm
    ALIGN_KPT = 40.0         # deg/rad
    ALIGN_KDT = 2.0          # deg*s/rad
    ALIGN_BETA = 0.5
    YAW_LIMIT_DEG = 5.0
    ABDUCTION_LIMIT_DEG = 30.0

    # Step-response harness
    STEP_DT_S = 0.005
    STEP_DURATION_S = 60.0

    # Gripper geometry and plant
    RAIL_SPAN_MM = 160.0
    FINGER_LENGTH_MM = 60.0
    ABDUCTION_RANGE_RAD = math.radians(30.0)
    ACTUATOR_TIME_CONSTANT_S = 0.1
    POSITION_NOISE_MM = 0.0
    CARRIAGE_OFFSET_MM = 40.0
    DEPTH_RANGE_MM = 20.0
    WORKSPACE_RESOLUTION_MM = 1.0

    # Episode
    SLIDE_SPEED_MM_S = 15.0
    CONTROL_RATE_HZ = 30.0
    MAX_DURATION_S = 40.0
    CORRECTION_ROTATION_DEG = 3.0
    CORRECTION_DEPTH_MM = 4.0
    START_OFFSET_MM = 30.0
    YAW_UNLOAD_GAIN = 0.5     # 1/s
    SETTLE_TOLERANCE_MM = 0.5
    MAX_CORRECTION_TICKS = 30

    # Benchmark suite: name, texture, texture amplitude, noise sigma, crumple severity
    FABRIC_PROFILES = (
        ('TF1', 'plain', 0.0, 0.02, 0.25),
        ('TF2', 'stripes', 0.15, 0.03, 0.30),
        ('TF3', 'dots', 0.20, 0.03, 0.30),
        ('TF4', 'weave', 0.15, 0.04, 0.35),
        ('PT1', 'stripes', 0.30, 0.05, 0.40),
        ('LB1', 'weave', 0.30, 0.06, 0.45),
        ('PT2', 'dots', 0.25, 0.05, 0.40),
    )
    TRIALS_PER_CONFIG = 5
