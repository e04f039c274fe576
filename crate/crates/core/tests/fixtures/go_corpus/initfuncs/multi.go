package initfuncs

var order []int

func init() {
	order = append(order, 1)
}

func init() {
	order = append(order, 2)
}

func _() {
	_ = order
}

func Order() []int { return order }
