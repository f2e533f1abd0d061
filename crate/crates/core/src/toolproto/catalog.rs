use serde_json::{json, Value};

use super::{ArgKind, ArgSpec, ToolSpec};

fn arg(name: &str, description: &str, kind: ArgKind) -> ArgSpec {
    ArgSpec {
        name: name.into(),
        description: description.into(),
        required: true,
        default: None,
        kind,
        hidden: false,
    }
}

fn opt(name: &str, description: &str, kind: ArgKind, default: Option<Value>) -> ArgSpec {
    ArgSpec { required: false, default, ..arg(name, description, kind) }
}

fn spec(
    name: &str,
    description: &[&str],
    args: Vec<ArgSpec>,
    rets: &[(&str, &str)],
    examples: Vec<Value>,
) -> ToolSpec {
    ToolSpec {
        name: name.into(),
        description: description.join("\n"),
        args,
        rets: rets.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        examples,
        aliases: Vec::new(),
    }
}

const INDOOR_OUTDOOR: &[&str] = &["indoor", "outdoor"];

/// The full tool catalog in presentation order.
pub fn catalog_specs() -> Vec<ToolSpec> {
    let mut flow = spec(
        "EstimateOpticalFlow",
        &[
            "Estimate optical flow between two images to measure motion in pixels.",
            "Returns average displacement in horizontal (x) and vertical (y) directions.",
            "First image is earlier in time; second is later.",
            "- mean_flow_x > 0: objects move left / camera moves right.",
            "- mean_flow_x < 0: objects move right / camera moves left.",
            "- mean_flow_y > 0: objects move up / camera moves down.",
            "- mean_flow_y < 0: objects move down / camera moves up.",
            "Useful for analyzing camera motion, object movement, and 3D spatial reasoning.",
        ],
        vec![arg(
            "image",
            "A list of exactly two image paths to compute optical flow between. First image is earlier in time.",
            ArgKind::ImagePair,
        )],
        &[(
            "output",
            "Dictionary containing 'mean_flow_x' (average horizontal pixel displacement) and 'mean_flow_y' (average vertical pixel displacement).",
        )],
        vec![json!({"name": "EstimateOpticalFlow", "arguments": {"image": ["image-1", "image-3"]}})],
    );
    flow.aliases.push(("images".into(), "image".into()));

    let mut homography = spec(
        "EstimateHomographyMatrix",
        &[
            "Compute a 3*3 homography matrix between two images using SIFT features and RANSAC.",
            "Useful for alignment, perspective correction, and planar transformations.",
        ],
        vec![
            arg("image", "List of two image paths.", ArgKind::ImagePair),
            opt("num_keypoints", "Max keypoints per image (default: 1200).", ArgKind::PositiveInt, Some(json!(1200))),
            opt("ratio_th", "Ratio test threshold (default: 0.75).", ArgKind::UnitInterval, Some(json!(0.75))),
            opt(
                "ransac_reproj_threshold",
                "Max reprojection error in RANSAC (default: 5.0).",
                ArgKind::PositiveNumber,
                Some(json!(5.0)),
            ),
        ],
        &[
            ("homography_matrix", "3*3 matrix mapping points from first image to second."),
            ("inliers_count", "Number of inlier matches used."),
            ("total_matches", "Total matches found."),
            ("status", "Success or failure."),
        ],
        vec![json!({"name": "EstimateHomographyMatrix", "arguments": {"image": ["image-0", "image-1"], "num_keypoints": 1200, "ratio_th": 0.75, "ransac_reproj_threshold": 5.0}})],
    );
    homography.args.push(ArgSpec {
        hidden: true,
        ..opt("matches", "Precomputed [[x1, y1], [x2, y2]] correspondences.", ArgKind::Matches, None)
    });

    let mut thinking = spec(
        "SelfThinking",
        &[
            "Modes:",
            "1. Text-only: Provide 'query' for pure language tasks.",
            "2. Vision+Language: Provide 'images' + 'query' for visual analysis.",
            "Suitable for: Scene understanding, OCR, object/color recognition, classification, and concept-level Q&A.",
        ],
        vec![
            arg("query", "Text question or instruction (REQUIRED).", ArgKind::Text),
            opt(
                "image",
                "List of image paths. If omitted, the model performs text-only reasoning.",
                ArgKind::ImageOrList,
                None,
            ),
        ],
        &[("response", "Model's response string.")],
        vec![json!({"name": "SelfThinking", "arguments": {"query": "Summarize the image content.", "image": "image-0"}})],
    );
    thinking.aliases.push(("images".into(), "image".into()));

    vec![
        spec(
            "LocalizeObjects",
            &["Localize specific objects in an image.", "Returns bounding boxes for target categories, optionally visualizing them."],
            vec![
                arg("image", "The image to analyze.", ArgKind::Image),
                arg("objects", "A list of object categories to detect.", ArgKind::TextList),
            ],
            &[("regions", "List of detected regions with label, bbox")],
            vec![json!({"name": "LocalizeObjects", "arguments": {"image": "image-0", "objects": ["dog", "cat"]}})],
        ),
        spec(
            "CountObjects",
            &["Count target objects in an image. Returns the coordinates of each detected target as points."],
            vec![
                arg("image", "The image to analyze.", ArgKind::Image),
                arg("objects", "List of object categories to count.", ArgKind::TextList),
            ],
            &[("points", "Dictionary {category: [points...]}, points in normalized coordinates.")],
            vec![json!({"name": "CountObjects", "arguments": {"image": "image-0", "objects": ["bed"]}})],
        ),
        spec(
            "GetObjectMask",
            &[
                "Generate pixel-level segmentation masks for specified objects.",
                "Returns mask area ratios and bounding boxes for each detected object.",
                "Suitable for analyzing object shapes, sizes, and coverage.",
            ],
            vec![
                arg("image", "Image file to process.", ArgKind::Image),
                arg("objects", "List of object descriptions to localize and segment.", ArgKind::TextList),
            ],
            &[(
                "results",
                "List of dicts with mask area ratio, bounding box, and optional error: [{'object': str, 'mask_area': float, 'bbox': [left, top, right, bottom], 'error': str or None}]",
            )],
            vec![json!({"name": "GetObjectMask", "arguments": {"image": "image-0", "objects": ["coffee mug", "microwave"]}})],
        ),
        spec(
            "Detect3DObjects",
            &[
                "Detect specific objects in an image and estimate their 3D bounding boxes.",
                "Returns 3D bounding box parameters in the following format:",
                "x, y, z -> object center in camera coordinates (meters);",
                "width, height, length -> physical size (width, height, length) in meters;",
                "yaw -> heading angle around vertical axis (radians).",
            ],
            vec![
                arg("image", "Path to the input image.", ArgKind::ImageOrList),
                arg("objects", "List of object categories to detect (or a single string).", ArgKind::TextOrList),
            ],
            &[(
                "objects",
                "List of dicts with {label: str, bbox_3d: {x:float, y:float, z:float, width:float, height:float, length:float, yaw:float}}",
            )],
            vec![json!({"name": "Detect3DObjects", "arguments": {"image": ["image-1"], "objects": ["dog", "rabbit"]}})],
        ),
        flow,
        spec(
            "MatchImagesSIFT",
            &[
                "Match keypoints between two images using SIFT.",
                "Detects distinctive features and returns matched coordinate pairs for tasks like alignment or recognition.",
            ],
            vec![
                arg("image", "List of two image paths.", ArgKind::ImagePair),
                opt("num_keypoints", "Max keypoints per image (default: 1200).", ArgKind::PositiveInt, Some(json!(1200))),
                opt(
                    "ratio_th",
                    "Ratio test threshold for matching (default: 0.75).",
                    ArgKind::UnitInterval,
                    Some(json!(0.75)),
                ),
            ],
            &[
                ("matches", "List of matched coordinate pairs: [[x1, y1], [x2, y2]]."),
                ("num_matches", "Total number of matches found."),
            ],
            vec![json!({"name": "MatchImagesSIFT", "arguments": {"image": ["image-0", "image-1"], "num_keypoints": 1200, "ratio_th": 0.75}})],
        ),
        homography,
        spec(
            "GetCameraParametersVGGT",
            &[
                "Extract camera extrinsic (3*4, relative to first image) and intrinsic (3*3) parameters from images using VGGT.",
                "Useful for 3D reconstruction, novel view synthesis, and geometric analysis.",
            ],
            vec![arg("image", "List of image paths (at least one).", ArgKind::ImageList)],
            &[("output", "List of dicts with image_index (int), extrinsic (3*4 matrix), and intrinsic (3*3 matrix).")],
            vec![json!({"name": "GetCameraParametersVGGT", "arguments": {"image": ["image-0", "image-1"]}})],
        ),
        spec(
            "EstimateObjectGeometryProperties",
            &[
                "Analyze objects in an image to obtain bounding boxes, mask areas, depth (m), and camera parameters.",
                "Camera parameters include intrinsic (3*3) and extrinsic (3*4) matrices for 3D geometry tasks.",
            ],
            vec![
                arg("image", "Image file path to analyze.", ArgKind::Image),
                arg("object_descs", "List of object descriptions (e.g., ['dog', 'cat']).", ArgKind::TextList),
            ],
            &[
                ("results", "List of dicts with object, bbox, mask_area, depth (m), and optional error."),
                ("camera_parameters", "Dict with intrinsic (3*3) and extrinsic (3*4) matrices."),
            ],
            vec![json!({"name": "EstimateObjectGeometryProperties", "arguments": {"image": "image-0", "object_descs": ["coffee cup", "keyboard"]}})],
        ),
        spec(
            "EstimateRegionDepth",
            &[
                "Estimate metric depth (in meters) of specified regions in an image.",
                "Supports indoor (0-20m) and outdoor (0-80m) scenes.",
                "Works with single or multiple bounding boxes in pixel coordinates.",
                "Depth is distance from camera to object, not between objects or object size.",
            ],
            vec![
                arg("image", "Image to analyze.", ArgKind::Image),
                arg(
                    "bboxes",
                    "Bounding box or list of boxes in pixel coordinates: [left, top, right, bottom] or [[...], ...].",
                    ArgKind::BoxOrBoxes,
                ),
                arg("indoor_or_outdoor", "Scene type ('indoor' or 'outdoor').", ArgKind::Choice(INDOOR_OUTDOOR)),
                opt(
                    "mode",
                    "Depth calculation: 'mean' (average) or 'center' (center point). Default: 'mean'.",
                    ArgKind::Choice(&["mean", "center"]),
                    Some(json!("mean")),
                ),
            ],
            &[
                (
                    "depths",
                    "List of dicts with bbox, depth (m), and optional error: [{'bbox': list, 'depth': float, 'error': str or None}]",
                ),
                ("unit", "Always 'meters'."),
            ],
            vec![json!({"name": "EstimateRegionDepth", "arguments": {"image": "image-0", "bboxes": [[100, 50, 200, 150], [150, 100, 250, 200]], "indoor_or_outdoor": "indoor"}})],
        ),
        spec(
            "EstimateObjectDepth",
            &[
                "Estimate object depth (in meters) from an image.",
                "Supports indoor (0-20m) and outdoor (0-80m) scenes.",
                "Depth indicates distance from camera to object, not between objects or object size.",
            ],
            vec![
                arg("image", "Image to analyze.", ArgKind::Image),
                arg(
                    "objects",
                    "List of object descriptions to measure distance to (e.g., ['dog', 'cat']).",
                    ArgKind::TextList,
                ),
                arg("indoor_or_outdoor", "Scene type ('indoor' or 'outdoor').", ArgKind::Choice(INDOOR_OUTDOOR)),
            ],
            &[(
                "results",
                "List of dicts with object description, depth (m), and optional error: [{'object': str, 'depth': float, 'error': str or None}]",
            )],
            vec![json!({"name": "EstimateObjectDepth", "arguments": {"image": "image-0", "objects": ["the red car", "dog"], "indoor_or_outdoor": "outdoor"}})],
        ),
        spec(
            "GetObjectOrientation",
            &[
                "Estimate 3D orientation of objects in an image using Orient-Anything.",
                "Measures:",
                "- Azimuth: Horizontal rotation (0-360° clockwise)",
                "- Polar: Vertical inclination (0-180°)",
                "- Rotation: In-plane rotation (-180° to +180°)",
                "- Confidence: Reliability score",
                "Useful for 3D understanding, pose estimation, and spatial reasoning.",
            ],
            vec![
                arg("image", "Image to analyze.", ArgKind::Image),
                arg("objects", "Object description(s) to analyze; string or list.", ArgKind::TextOrList),
            ],
            &[(
                "results",
                "List of dicts with object orientation data: [{'object': str, 'angle_data': {'azimuth': float, 'polar': float, 'rotation': float, 'confidence': float}, 'error': str or None}]",
            )],
            vec![json!({"name": "GetObjectOrientation", "arguments": {"image": "image-0", "objects": "a red car"}})],
        ),
        spec(
            "Get3DDistance",
            &[
                "Calculates the absolute 3D spatial distance (in meters) between two pixel points (x, y) in an image.",
                "Note: this tool should be used in outdoor scenes.",
                "Returns the calculated distance (in meters).",
            ],
            vec![
                arg("image", "Path to the input image.", ArgKind::Image),
                arg("point_1", "List of [x, y] pixel coordinates for the first point.", ArgKind::Point),
                arg("point_2", "List of [x, y] pixel coordinates for the second point.", ArgKind::Point),
            ],
            &[("distance_meters", "The calculated 3D distance (float, in meters).")],
            vec![json!({"name": "Get3DDistance", "arguments": {"image": "image-0", "point_1": [100, 100], "point_2": [1000, 1000]}})],
        ),
        spec(
            "Terminate",
            &[
                "Use this function ONLY when you are completely confident in your final answer.",
                "For multiple-choice questions: Specify the letter of the correct option.",
                "For numerical answers: Include both the specific value and appropriate unit of measurement (e.g., meter or centimeter).",
                "For yes/no questions: Clearly state 'Yes' or 'No'.",
                "DO NOT call this function if you are uncertain or need to perform additional analysis.",
                "Double-check your answer before terminating!",
            ],
            vec![arg(
                "answer",
                "The final answer with proper formatting. For multiple choice: include letter (e.g., 'A. explanation' or '(B)'). For numerical answers: include units (e.g., '3.25 meters').",
                ArgKind::Answer,
            )],
            &[("answer", "The final answer that will be submitted.")],
            ["A. Yes.", "(B).", "B. 3.25 meters.", "(A) 2 inches.", "47.3 centimeters.", "38.2 degrees."]
                .iter()
                .map(|a| json!({"name": "Terminate", "arguments": {"answer": a}}))
                .collect(),
        ),
        thinking,
    ]
}
