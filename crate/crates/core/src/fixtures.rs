//! Registry holding every entity the three example scenarios mention.

use crate::model::{Category, DeviceKind, DeviceRecord, ParamDomain, Registry, RobotRecord, Tier};
use crate::scenario::parse_scenario;

pub const WATERING_PLANTS: &str = "Scenario name: Watering Plants
A. Sprinkler 1: on @ 5:00 AM
B. Sprinkler 2: on @ 5:30 AM
C. Sprinkler 1: off @ 7:00 AM
D. Sprinkler 2: off @ 9:00 AM
";

pub const CLEAN_HOME: &str = "Scenario name: Clean Home
A. Cleaning robot: Clean (Bathtub) @ Now
B. [Gather Dishes] @ 10:00 AM
C. Home robot→Washing machine: on @ 10:05 AM
D. Cleaning robot: Clean (Saloon) @ 10:05 AM
";

pub const GATHER_DISHES: &str = "Scenario name: Gather Dishes
A. Mover robot: GoTo (Saloon) @ Now
B. Mover robot: PickUp (Dishes) @ In 2 Minutes
C. Mover robot: GoTo (Kitchen) @ In 5 Minutes
D. Mover robot: PutInto (WashingMachine) @ In 6 Minutes
E. Mover robot: GoTo (DefaultPosition) @ In 7 Minutes
";

fn on_off(oid: u32, name: &str) -> DeviceRecord {
    DeviceRecord::new(oid, name, DeviceKind::Actuator, Category::OnOff, Tier::Ambient)
        .with_verb("on", ParamDomain::None)
        .with_verb("off", ParamDomain::None)
}

pub fn demo_registry() -> Registry {
    let mut reg = Registry::new();
    for d in [
        on_off(1, "Sprinkler 1"),
        on_off(2, "Sprinkler 2"),
        on_off(5, "Washing machine"),
        on_off(8, "Lamp").with_icon("lamp"),
        DeviceRecord::new(6, "temp", DeviceKind::Sensor, Category::Leveled, Tier::Security).with_range(-20, 60),
        DeviceRecord::new(
            7,
            "Door",
            DeviceKind::ActuatorSensor,
            Category::OpenedClosed,
            Tier::Security,
        )
        .with_verb("open", ParamDomain::None)
        .with_verb("close", ParamDomain::None)
        .with_icon("door"),
    ] {
        reg.register_device(d).unwrap();
    }
    for r in [
        RobotRecord::new(2, "Cleaning robot")
            .with_action("Clean", ParamDomain::ObjectName)
            .with_action("GoTo", ParamDomain::Location),
        RobotRecord::new(3, "Mover robot")
            .with_action("GoTo", ParamDomain::Location)
            .with_action("PickUp", ParamDomain::ObjectName)
            .with_action("PutInto", ParamDomain::ObjectName),
        RobotRecord::new(4, "Home robot")
            .with_action("GoTo", ParamDomain::Location)
            .with_delegation(5, "on")
            .with_delegation(5, "off")
            .with_delegation(8, "on"),
    ] {
        reg.register_robot(r).unwrap();
    }
    for text in [WATERING_PLANTS, GATHER_DISHES, CLEAN_HOME] {
        reg.put_scenario(parse_scenario(text).unwrap());
    }
    reg
}
