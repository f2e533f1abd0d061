//! Question templates, grouped as `(group id, templates)`.

pub type TemplateGroup = (&'static str, &'static [&'static str]);

pub const EXISTENCE: &[TemplateGroup] = &[
    ("IS_THERE", &["Is there any {category} present in the image?"]),
    ("DOES_CONTAIN", &["Does the image contain any {category}?"]),
    ("IS_VISIBLE", &["Is any {category} visible in this image?"]),
    ("CAN_YOU_SEE", &["Can you see any {category} in this image?"]),
];

pub const DETECT_3D: &[TemplateGroup] = &[
    (
        "DETECT_3D_BBOX",
        &[
            "Detect the 3D bounding box of the {object_name} in the image.",
            "Provide the 3D bounding box for the {object_name}.",
            "What is the 3D bounding box of the {object_name}?",
            "Locate the {object_name} and output its 3D bounding box.",
            "Output the 3D bounding box coordinates for the {object_name}.",
        ],
    ),
    (
        "PROVIDE_3D_BBOX",
        &[
            "Can you provide the 3D bounding box of the {object_name}?",
            "Please detect and output the 3D bounding box for the {object_name}.",
            "Identify the {object_name} and provide its 3D bounding box coordinates.",
            "What are the 3D coordinates of the {object_name}'s bounding box?",
        ],
    ),
    (
        "WHAT_IS_3D_BBOX",
        &[
            "What is the 3D bounding box of the {object_name}?",
            "Where is the {object_name} located in 3D space? Provide its bounding box.",
            "Determine the 3D bounding box coordinates for the {object_name}.",
        ],
    ),
];

pub const ABS_DEPTH: &[TemplateGroup] = &[
    (
        "HOW_FAR",
        &[
            "How far is the {object_name} from the camera?",
            "What is the distance of the {object_name} from the camera?",
            "How far away is the {object_name}?",
        ],
    ),
    (
        "DISTANCE_FROM_CAMERA",
        &[
            "What is the approximate distance from the camera to the {object_name}?",
            "How many {unit} away is the {object_name} from the camera?",
            "At what distance is the {object_name} located from the camera?",
        ],
    ),
    (
        "APPROXIMATE_DISTANCE",
        &[
            "Approximately how far is the {object_name}?",
            "What is the rough distance to the {object_name}?",
            "How far would you estimate the {object_name} to be?",
        ],
    ),
];

pub const ABS_DISTANCE: &[TemplateGroup] = &[(
    "ABS_DISTANCE",
    &[
        "What is the distance between the {object1} and the {object2}?",
        "How far apart are the {object1} and the {object2}?",
        "What is the approximate distance from the {object1} to the {object2}?",
        "How much distance separates the {object1} and the {object2}?",
        "What is the spatial separation between the {object1} and the {object2}?",
    ],
)];

pub const ABS_SIZE: &[TemplateGroup] = &[
    (
        "WHAT_IS_DIMENSION",
        &[
            "What is the {dimension} of the {object_name}?",
            "What is the {dimension} {dimension_type} of the {object_name}?",
            "How much is the {dimension} of the {object_name}?",
        ],
    ),
    (
        "HOW_DIMENSION",
        &["How {dimension} is the {object_name}?", "How {dimension_adj} is the {object_name}?"],
    ),
    (
        "DIMENSION_OF_OBJECT",
        &[
            "What is the {object_name}'s {dimension}?",
            "How would you measure the {dimension} of the {object_name}?",
            "What dimension represents the {dimension} of the {object_name}?",
        ],
    ),
];

pub const REL_DEPTH: &[TemplateGroup] = &[(
    "REL_DEPTH",
    &[
        "Which object is closest to the camera?",
        "Among the following objects, which one is nearest to the camera?",
        "Which of these objects has the shortest distance from the camera?",
        "Select the object that is closest to the camera:",
        "Which object appears closest in the image?",
    ],
)];

pub const REL_DISTANCE: &[TemplateGroup] = &[(
    "REL_DISTANCE",
    &[
        "Among the following objects, which one is closest to the {reference}?",
        "Which object has the shortest distance to the {reference}?",
        "Select the object that is nearest to the {reference}:",
        "Which of these objects is closest to the {reference}?",
        "What object is positioned closest to the {reference}?",
    ],
)];

pub const REL_SIZE: &[TemplateGroup] = &[
    (
        "HEIGHT_LARGER",
        &[
            "Which object is taller, the {object1} or the {object2}?",
            "Between the {object1} and the {object2}, which one is higher?",
            "Which is taller: the {object1} or the {object2}?",
            "Compare the height of the {object1} and the {object2}. Which one is taller?",
        ],
    ),
    (
        "WIDTH_LARGER",
        &[
            "Which object is wider, the {object1} or the {object2}?",
            "Between the {object1} and the {object2}, which one is wider?",
            "Which is wider: the {object1} or the {object2}?",
            "Compare the width of the {object1} and the {object2}. Which one is wider?",
        ],
    ),
    (
        "LENGTH_LARGER",
        &[
            "Which object is longer, the {object1} or the {object2}?",
            "Between the {object1} and the {object2}, which one is longer?",
            "Which is longer: the {object1} or the {object2}?",
            "Compare the length of the {object1} and the {object2}. Which one is longer?",
        ],
    ),
    (
        "HEIGHT_SMALLER",
        &[
            "Which object is shorter, the {object1} or the {object2}?",
            "Between the {object1} and the {object2}, which one is lower?",
            "Which is shorter: the {object1} or the {object2}?",
            "Compare the height of the {object1} and the {object2}. Which one is shorter?",
        ],
    ),
    (
        "WIDTH_SMALLER",
        &[
            "Which object is narrower, the {object1} or the {object2}?",
            "Between the {object1} and the {object2}, which one is narrower?",
            "Which is narrower: the {object1} or the {object2}?",
            "Compare the width of the {object1} and the {object2}. Which one is narrower?",
        ],
    ),
    (
        "LENGTH_SMALLER",
        &[
            "Which object is shorter in length, the {object1} or the {object2}?",
            "Between the {object1} and the {object2}, which one is shorter?",
            "Which is shorter: the {object1} or the {object2}?",
            "Compare the length of the {object1} and the {object2}. Which one is shorter?",
        ],
    ),
];

pub const INTRINSICS: &[TemplateGroup] = &[
    (
        "FOCAL_LENGTH",
        &[
            "What is the camera's focal length in pixels?",
            "What is the focal length of the camera?",
            "Can you determine the camera's focal length?",
        ],
    ),
    (
        "PRINCIPAL_POINT",
        &[
            "What are the image center coordinates in the camera intrinsics?",
            "What is the principal point of the camera?",
            "What are the coordinates of the image center?",
        ],
    ),
    (
        "FOCAL_LENGTH_X",
        &[
            "What is the horizontal focal length (fx) in pixels?",
            "What is the camera's focal length in the x-direction?",
            "Can you determine the horizontal focal length?",
        ],
    ),
    (
        "FOCAL_LENGTH_Y",
        &[
            "What is the vertical focal length (fy) in pixels?",
            "What is the camera's focal length in the y-direction?",
            "Can you determine the vertical focal length?",
        ],
    ),
    (
        "ASPECT_RATIO",
        &[
            "What is the aspect ratio of the camera's focal lengths (fx/fy)?",
            "What is the ratio between horizontal and vertical focal lengths?",
            "Can you calculate the aspect ratio from the camera intrinsics?",
        ],
    ),
];

pub const EXTRINSICS: &[TemplateGroup] = &[(
    "EXTRINSICS",
    &[
        "What is the transformation matrix from the first camera coordinate system to the second camera coordinate system in OpenCV convention?",
        "Can you provide the relative transformation matrix between the two camera poses in OpenCV convention?",
        "What is the 4x4 transformation matrix that transforms coordinates from the first camera frame to the second camera frame in OpenCV convention?",
        "Please calculate the extrinsic transformation matrix from camera 1 to camera 2 in OpenCV convention.",
    ],
)];

pub const CAMERA_MOTION_MC: &[TemplateGroup] = &[(
    "multi_choice",
    &[
        "Which best describes the camera motion between these two images?",
        "How did the camera primarily move?",
        "What type of camera movement occurred?",
        "Which motion pattern best matches the camera transformation?",
    ],
)];

pub const CAMERA_MOTION_OPEN: &[TemplateGroup] = &[(
    "open_ended",
    &[
        "What kind of camera motion occurred between the two images?",
        "Describe the relative motion of the camera from the first image to the second image.",
        "How did the camera move between these two frames?",
        "Can you describe the camera movement between the two views?",
        "What is the camera's motion from the first view to the second view?",
    ],
)];

pub const POINT_TRACKING: &[TemplateGroup] = &[(
    "POINT_TRACKING",
    &[
        "In the first image, there is a point at coordinates ({x1}, {y1}). Which point in the second image corresponds to this tracked point?",
        "Given a point at position ({x1}, {y1}) in image 1, which of the following coordinates in image 2 represents the same tracked point?",
        "A point is tracked from image 1 at ({x1}, {y1}). Where does this point appear in image 2?",
        "Tracking point from image 1: ({x1}, {y1}). Select its corresponding location in image 2:",
    ],
)];

pub const HOMOGRAPHY: &[TemplateGroup] = &[(
    "HOMOGRAPHY",
    &[
        "What is the homography matrix that transforms the original image to the given transformed image?",
        "Please provide the 3x3 homography transformation matrix between the original and transformed images.",
        "Calculate the homography matrix that maps the original image to the transformed version.",
        "What is the perspective transformation matrix from the original image to the transformed image?",
    ],
)];

pub const DIRECTION_RULE: &str = "Directions use an 8-way compass on the map: north is up (+y) and east is right (+x). Each direction covers a 45-degree sector centered on its heading; a bearing exactly on a sector boundary belongs to the adjacent cardinal direction (north, east, south or west).";

pub const SPATIAL_DIRECTION_RELATION: &str = "In which direction is {q1_p1} relative to {q1_p2}? {DIRECTION_RULE}";
pub const SPATIAL_FIND_OBJECT: &str = "Which object is in the {target_dir} of {q2_p1}? {DIRECTION_RULE}";
pub const SPATIAL_COUNT_OBJECTS: &str = "How many objects are in the {q3_target_dir} of {q3_p1}? {DIRECTION_RULE}";
pub const SPATIAL_CLOSEST_OBJECT: &str = "Which object is closest to {q4_p1}?";

pub const VIEW_RULE: &str = "The front view is observed from the positive direction of the Y-axis toward the negative direction, the left view is observed from the positive direction of the X-axis toward the negative direction, and the top view is observed from the positive direction of the Z-axis toward the negative direction.";

pub const VIEW_IDENTIFICATION: &str = "The first image shows a 3D view of the scene, while the second shows one of the three orthographic views of this 3D scene. What type of view is displayed in the second image? {VIEW_RULE}";
pub const VIEW_MATCHING: &str = "Which option shows the {target_view} view of the 3D scene? {VIEW_RULE}";

pub const ROTATION_2D: &str = "Which option is the rotated version of the reference shape?";
pub const ROTATION_3D: &str = "Which option is the rotated version of the reference 3D shape?";

/// Fills `{name}` slots from `values`; unknown slots are left as written.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// Flattened `(template id, template)` list for a group table.
pub fn flatten(groups: &[TemplateGroup]) -> Vec<(String, &'static str)> {
    groups
        .iter()
        .flat_map(|(g, ts)| ts.iter().enumerate().map(move |(i, t)| (format!("{g}/{i}"), *t)))
        .collect()
}
