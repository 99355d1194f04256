"""Frozen prompt and instruction templates.

These strings are tuned artifacts: downstream cassettes key off their exact
bytes via request fingerprints, so edit them only with a migration plan for
recorded fixtures.
"""

_EXPERT_PREAMBLE = (
    "Now you are a legal expert on HIPAA Privacy Rule that answers questions "
    "as simply as possible."
)

_TYPE_MENU = (
    '"Definition", "Permit", "Forbid", "Exception", "Requirement", '
    '"Permit and Exception", "Forbid and Exception", "Permit and Requirement", '
    '"Forbid and Requirement", "Permit and Exception and Requirement", '
    '"Forbid and Exception and Requirement", "Other"'
)

_VITAL_FIELD_DESCRIPTIONS = (
    'The "Sender" and "Recipient" fields indicate the sender and recipient of '
    "the message.\n"
    'The "Sender Role" and "Recipient Role" fields indicate the role of the '
    "sender and recipient (e.g., doctor, patient).\n"
    'The "Subject" and "Subject Role" field identifies the subject whose '
    "personal health information is contained in the message and the role of "
    "the subject.\n"
    'The "Type" field defines what kind of information would be passed, such '
    "as name or location."
)

_PRINCIPLE_FIELD_DESCRIPTIONS = (
    'The "Purpose" field indicates a reason the message is being sent, such '
    "as for medical treatment.\n"
    'The "In Reply To" field was added to describe a disclosure where the '
    "message is sent as a response to some earlier message.\n"
    'The "Consented By" field indicates which people have consented to the '
    "message disclosure.\n"
    'The "Belief" field contains a collection of assertions about the current '
    "situation, such as whether this is a medical emergency, or whether the "
    "disclosure is (in the opinion of the sender) in the best interest of the "
    "health of the patient."
)

NORM_CLASSIFICATION_PROMPT = f"""{_EXPERT_PREAMBLE}
Please read the following regulation {{text}}, and finish the following task.

Q1: (Classification) Classify the regulation type of the following regulation. The regulation type is one of the following: {_TYPE_MENU}.

Definition: The regulation defines a term or characteristic.
Permit: The regulation permits certain actions regarding the flow of private information.
Forbid: The regulation forbids certain actions regarding the flow of private information.
Exception: The regulation defines an exception to a certain action about privacy information flow.
Requirement: The regulation defines a requirement for privacy information flow.
Other: The regulation is not in the above types.

Q2: If the regulation type is "Definition", please annotate the name of the term or characteristic defined in the regulation.

Q3: If the regulation type is "Definition", please annotate the definition of the term or characteristic defined in the regulation.

Q4: If the regulation type contains "Permit", please annotate the action permitted in the regulation.

Q5: If the regulation type contains "Forbid", please annotate the action forbidden in the regulation.

Q6: If the regulation type contains "Exception", please annotate the exception defined in the regulation.

Q7: If the regulation type contains "Requirement", please annotate the requirement defined in the regulation.

Q8: If the regulation type is "Other", please give your own classification of the regulation type."""

CASE_GENERATION_PROMPT = f"""{_EXPERT_PREAMBLE}
Read the regulation: {{text}}.
The regulation type is: {{type}}.

Q1. Create a legal case only related to regulation {{id}} and the type {{type}}. The case must be a detailed story in plain text, spanning between 200 to 500 words, closely related to the regulation {{id}}. The story must include the following seven characteristics about the flow of private information: [Sender, Sender Role, Recipient, Recipient Role, Subject, Subject Role, Type].

{_VITAL_FIELD_DESCRIPTIONS}
Integrate these seven characteristics seamlessly into the story without explicitly listing them.

Except for the seven characteristics, you can add the four optional characteristics [Purpose, In Reply To, Consented By, Belief] if mentioned in the regulation {{id}} or necessary.
{_PRINCIPLE_FIELD_DESCRIPTIONS}
Integrate these four characteristics seamlessly into the story without explicitly listing them.

Q2: Based on the background created in Q1, list the eleven characteristics regarding the flow of private information (Mark as "None" if not exist)

Q3: Please retrieve all the specific HIPAA regulation IDs that are the permission or prohibition description of the case. Please be as specific as possible to the sub-section id (e.g., 164.xxx).

Q4: Please classify the relation between the case and the regulation {{id}} as one of the following: "Permit", "Forbid", "Not Applicable".

Q5: Please classify the relation between the case and the HIPAA Privacy Rule as one of the following: "Permit", "Forbid", "Not Applicable"."""

REAL_CASE_PROMPT = f"""{_EXPERT_PREAMBLE}
Read the case: {{case}}.

Q1. If the case involves the flow of private information. Please annotate the eleven message characteristics [Sender, Sender Role, Recipient, Recipient Role, Subject, Subject Role, Type, Purpose, In Reply To, Consented By, Belief] about the flow of private information in the case as a list. If the characteristic does not exist, just fill in None.

{_VITAL_FIELD_DESCRIPTIONS}
{_PRINCIPLE_FIELD_DESCRIPTIONS}

Q2: Please retrieve all the specific HIPAA regulation IDs that are the permission or prohibition description of the case. Please be as specific as possible to the sub-section id (e.g., 164.xxx). If the regulations do not exist, just fill in None.

Q3: Please classify the type of regulation(s). The regulation type is one of the following: {_TYPE_MENU}.

Q4: Please classify the relation between the case and each regulation in Q3 as one of the following: "Permit", "Forbid", and "Not Applicable".

Q5: A case may be associated with multiple regulations. If it is permitted by some regulations and not forbidden by any of the regulations, the case complies with HIPAA, answer "Permit". If it is not permitted by any of the regulations or forbidden by some regulations, the case violates HIPAA, answer "Forbid". Otherwise, if the case is not applicable to HIPAA, answer "Not Applicable". Please classify the relation between the flow of private information in the case and HIPAA as one of the following: "Permit", "Forbid", and "Not Applicable".

Q6: With the eleven characteristics in Q1, restore the BACKGROUND story of the case, especially about the flow of private information.

The case should not include any information about the regulation(s) in Q2 and the court decision. Make sure that the eleven characteristics are obviously included in the BACKGROUND story. The background must be a detailed story in plain text, spanning between 200 to 500 words."""

# Instruction-tuning templates (alpaca layout).  The trailing "### Response:"
# is part of the prompt so completions start immediately after it.

PROMPT_TEMPLATE_WITH_INPUT = """Below is an instruction that describes a task, paired with an input that provides further context. Write a response that appropriately completes the request.

### Instruction:
{instruction}

### Input:
{input}

### Response:"""

PROMPT_TEMPLATE_NO_INPUT = """Below is an instruction that describes a task. Write a response that appropriately completes the request.

### Instruction:
{instruction}

### Response:"""

CASE_INPUT_TEMPLATE = "Read the case background: {background}."

APPLICABILITY_VANILLA_INSTRUCTION = (
    "Please determine whether the HIPAA Privacy Rule is applicable to the case."
)

APPLICABILITY_MULTI_STEP_INSTRUCTION = (
    "Please assess the applicability of the HIPAA Privacy Rule to the case "
    "through the following steps: Step 1: Annotate the message characteristics "
    "[Sender, Sender Role, Recipient, Recipient Role, Subject, Subject Role, "
    "Type] about the flow of private information in the case as a list. "
    "Step 2: Determine whether the HIPAA Privacy Rule is applicable to the case."
)

COMPLIANCE_VANILLA_INSTRUCTION = (
    "Please determine whether the HIPAA Privacy Rule permits or forbids the case."
)

COMPLIANCE_MULTI_STEP_INSTRUCTION = (
    "Please assess the case for compliance with the HIPAA Privacy Rule through "
    "the following steps: Step 1: Annotate the eleven message characteristics "
    "[Sender, Sender Role, Recipient, Recipient Role, Subject, Subject Role, "
    "Type, Purpose, In Reply To, Consented By, Belief] about the flow of "
    "private information in the case as a list. Step 2: Identify and list all "
    "applicable HIPAA regulation IDs (e.g., 164.xxx) and their content. "
    "Step 3: Determine whether the HIPAA Privacy Rule permits or forbids the case."
)

RECITATION_INSTRUCTION = (
    "Please recite the contents of {norm_id} in the HIPAA Privacy Rule."
)
