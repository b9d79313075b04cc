"""Prompt text for the object-level planning dialogue and the baseline pipelines.

Slots are filled with ``str.format``-style fields. The alias-grounding and
repair prompts have no published wording and are kept short.
"""
from __future__ import annotations

from typing import Iterable, Sequence

OLP_SYSTEM = """You are a helpful assistant that will generate plans for robots. You will be given the following:
    1. A simple plan sketch, with which you will generate an entirely new plan sketch describing object states before (preconditions) and after (effects) actions are executed.
    2. A list of objects available to the robot.

    Note the following rules:
    - Closely follow the task prompt. You must use all objects except any objects not related to the task.
    - Be consistent with object names throughout the plan.
    - All objects are on the table in front of the robot.
    - Use one action verb per step. However, any steps involving "pick" or "place" must be written as a single step with the action "pick and place".
    - Use as many states as possible to describe object preconditions and effects.
    - Only use the states "in", "on", "under", or "contains" for describing objects. List them in the format "<relation> <obj>", where <relation> is a state and <obj> is a single object."""

OLP_INTRO = ("Your task will be to create a step-by-step plan for the following prompt: {task}. "
             "The following objects are available in the scene: {objects}. "
             "Say 'Okay!' if you understand the task.")

OLP_SELECT = ("Below are a list of prototype recipes. You must select the closest one that is the closest "
              "to the given task prompt. Simply provide the number corresponding to the closest prototype.\n\n"
              "{exemplars}")

OLP_SKETCH = ("Generate a concise plan using the prototype as inspiration for the task: {task}. "
              "Follow all guidelines. Give evidence to support your plan logic.")

OLP_OBJECTS = ("Make a Python list of used objects in the following format: [\"object_1\", \"object_2\", ...]'. "
               "If there are several instances of an object type, list them individually "
               "(e.g., ['first apple', 'second apple'] if two apples are used). Do not add any explanation.")

OLP_JSON = ("Format your generated plan as a JSON dictionary. List as many states as possible when describing "
            "each object's preconditions and effects. Each required object should match a key in "
            "\"object_states\": Be consistent with object names across actions. "
            "Use this JSON prototype as reference:\n\n{prototype_json}")

OLP_REPAIR = ("The JSON plan above has the following problems:\n{problems}\n\n"
              "Return the corrected plan as a single JSON dictionary in the same format. Do not add any explanation.")

ALIAS_GROUNDING = ("Map every object name used in a plan to exactly one object instance in the scene. "
                   "Different names must map to different instances.\n\n"
                   "Object names: {aliases}\n"
                   "Scene instances: {instances}\n\n"
                   "Answer with a JSON dictionary from object name to instance. Do not add any explanation.")

LLM_PLANNER_SYSTEM = """You are a helpful PDDL planning expert. Your job is to process a task prompt, a list of objects in the scene, and a list of statements describing the environment state, reason about how to solve the task, and produce a plan that solves the task.

A task plan has the format of:
    1. (<action_1> <arg1> <arg2>)
    2. (<action_2> <arg1> <arg2>)
    3. ...

Observe the following rules:
- In the task plan, you can only use these actions:
    1. (<pick> <obj1> <obj2>) - pick <obj1> that is on top of <obj2>; this causes nothing to be on <obj2>.
    2. (<place> <obj1> <obj2>) - place <obj1> on top of <obj2>; <obj2> must have nothing on it for <obj1> to be placed on it.
- Note the order of the arguments for both actions!
- The agent executing this task has a single hand: in order to pick up an object, the agent's hand must be free."""

LLM_PLANNER_SCENE = "There is a scenario with the following objects: {objects}. Please await further instructions."

LLM_PLANNER_GOAL = ("Your task is as follows: {task}. Transform this instruction into a PDDL goal specification "
                    "in terms of 'on' relations. Do not add any explanation.")

LLM_PLANNER_PLAN = ("Find a task plan in PDDL to achieve this goal given the initial state below. "
                    "Only specify the list of actions needed.  Use the actions defined above. "
                    "Do not add any explanation.\n\n"
                    "Initial state: {state}")

LLM_PLUS_P = ("I want you to generate a PDDL problem file for robot problem solving. "
              "An example planning problem is:\n\n"
              "{example}\n\n"
              "Now I have a new planning problem and its description is as follows: These objects are on the "
              "table: {objects}. The current state of the world is: {state}.\n\n"
              "Your goal is to achieve this task: {task}. Provide me with the problem PDDL file that describes "
              "the new planning problem  directly without further explanations.")

DELTA_DOMAIN = ("Role: You are an excellent PDDL domain file generator. Given a description of action knowledge "
                "in natural language, you can generate a PDDL domain file.\n\n"
                "Example: {example}\n\n"
                "Instruction: A new domain includes the following objects: {objects}. Please generate a "
                "corresponding new PDDL domain file for a robot. Do not add any explanation.")

DELTA_PROBLEM = ("Role: You are an excellent PDDL problem file generator. Given a description of the robot's "
                 "environment and a goal description, you can generate a PDDL problem file.\n\n"
                 "Example: {example}\n\n"
                 "Instruction: Now given a new description of the robot's scene and using the predicates in the "
                 "previously generated PDDL domain file, please generate a new PDDL problem file for the task: "
                 "{task}. \n\n"
                 "{state}")

DELTA_SUBGOALS = ("Role: You are an excellent assistant in decomposing long-term goals. Given a PDDL problem file, "
                  "you can decompose the long-term goal in a sequence of subgoals.\n\n"
                  "Example: {example}\n\n"
                  "Instruction: Given the PDDL problem previously generated, please decompose the long-term goal "
                  "into a sequence of subgoals considering the predicates and actions from the previously generated "
                  "PDDL domain file. Simply list the decomposed PDDL subgoals for each instruction in a similar "
                  "format as the example and only 1 level deep. ")


def object_list(objects: Iterable[str]) -> str:
    return ", ".join(objects)


def numbered(lines: Sequence[str]) -> str:
    return "\n".join(f"{i}. {line}" for i, line in enumerate(lines, 1))


def exemplar_listing(sketches: Sequence[Sequence[str]]) -> str:
    """Candidate plans as numbered prototypes, each a numbered list of steps."""
    blocks = [f"Prototype {i}:\n{numbered(steps)}" for i, steps in enumerate(sketches, 1)]
    return "\n\n".join(blocks)


def olp_intro(task: str, objects: Iterable[str]) -> str:
    return OLP_INTRO.format(task=task, objects=object_list(objects))


def olp_select(sketches: Sequence[Sequence[str]]) -> str:
    return OLP_SELECT.format(exemplars=exemplar_listing(sketches))


def olp_sketch(task: str) -> str:
    return OLP_SKETCH.format(task=task)


def olp_json(prototype_json: str) -> str:
    return OLP_JSON.format(prototype_json=prototype_json)


def olp_repair(problems: Iterable[str]) -> str:
    return OLP_REPAIR.format(problems="\n".join(f"- {p}" for p in problems))


def alias_grounding(aliases: Iterable[str], instances: Iterable[str]) -> str:
    return ALIAS_GROUNDING.format(aliases=object_list(aliases), instances=object_list(instances))


def llm_planner_scene(objects: Iterable[str]) -> str:
    return LLM_PLANNER_SCENE.format(objects=object_list(objects))


def llm_planner_goal(task: str) -> str:
    return LLM_PLANNER_GOAL.format(task=task)


def llm_planner_plan(state: str) -> str:
    return LLM_PLANNER_PLAN.format(state=state)


def llm_plus_p(example: str, objects: Iterable[str], state: str, task: str) -> str:
    return LLM_PLUS_P.format(example=example, objects=object_list(objects), state=state, task=task)


def delta_domain(example: str, objects: Iterable[str]) -> str:
    return DELTA_DOMAIN.format(example=example, objects=object_list(objects))


def delta_problem(example: str, task: str, state: str) -> str:
    return DELTA_PROBLEM.format(example=example, task=task, state=state)


def delta_subgoals(example: str) -> str:
    return DELTA_SUBGOALS.format(example=example)
